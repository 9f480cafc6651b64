#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "spnet/error.hpp"
#include "spnet/eval.hpp"

namespace spnet::eval {

namespace {

using nlohmann::json;

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

json point_json(const Point& p) { return json{{"x", p.x}, {"y", p.y}}; }

Point point_from(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json samples = json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"id", s.id},
                       {"pred", s.pred ? point_json(*s.pred) : json(nullptr)},
                       {"gt", point_json(s.gt)},
                       {"distance", s.distance ? json(*s.distance) : json(nullptr)}});
  }
  json curve = json::array();
  for (const auto& c : r.curve) curve.push_back({{"threshold", c.threshold}, {"accuracy", c.accuracy}});
  const json j{{"schema", r.schema},
               {"config", {{"threshold", r.threshold}, {"model_id", r.model_id},
                           {"dataset_id", r.dataset_id}}},
               {"tdr", r.tdr},
               {"missing_predictions", r.missing_predictions},
               {"unannotated", r.unannotated},
               {"unmatched_predictions", r.unmatched_predictions},
               {"curve_semantics", r.curve_semantics},
               {"curve", curve},
               {"samples", samples}};
  return j.dump(2) + "\n";
}

EvalReport parse_report(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != kReportSchema) {
      throw IoError("report.json: unsupported schema " + std::to_string(r.schema));
    }
    const json& cfg = j.at("config");
    r.threshold = cfg.at("threshold").get<double>();
    r.model_id = cfg.at("model_id").get<std::string>();
    r.dataset_id = cfg.at("dataset_id").get<std::string>();
    r.tdr = j.at("tdr").get<double>();
    r.missing_predictions = j.at("missing_predictions").get<std::size_t>();
    r.unannotated = j.at("unannotated").get<std::size_t>();
    r.unmatched_predictions = j.at("unmatched_predictions").get<std::size_t>();
    r.curve_semantics = j.at("curve_semantics").get<std::string>();
    for (const auto& c : j.at("curve")) {
      r.curve.push_back({c.at("threshold").get<double>(), c.at("accuracy").get<double>()});
    }
    for (const auto& s : j.at("samples")) {
      SampleResult out;
      out.id = s.at("id").get<std::string>();
      if (!s.at("pred").is_null()) out.pred = point_from(s.at("pred"));
      out.gt = point_from(s.at("gt"));
      if (!s.at("distance").is_null()) out.distance = s.at("distance").get<double>();
      r.samples.push_back(std::move(out));
    }
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("report.json: ") + e.what());
  }
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

std::string distances_csv(const EvalReport& r) {
  std::string out = "id,pred_x,pred_y,gt_x,gt_y,distance\n";
  for (const auto& s : r.samples) {
    out += s.id;
    out += ',';
    if (s.pred) out += num(s.pred->x) + ',' + num(s.pred->y);
    else out += ',';
    out += ',' + num(s.gt.x) + ',' + num(s.gt.y) + ',';
    if (s.distance) out += num(*s.distance);
    out += '\n';
  }
  return out;
}

std::string curve_svg(const EvalReport& r) {
  constexpr double kW = 480, kH = 320, kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  double t_max = 1.0;
  for (const auto& c : r.curve) t_max = std::max(t_max, c.threshold);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
      << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">Distance threshold (px)</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"13\""
      << " transform=\"rotate(-90 16 " << kTop + plot_h / 2 << ")\">Accuracy</text>\n";
  svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + plot_h + 4
      << "\" text-anchor=\"end\" font-size=\"11\">0</text>\n";
  svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4
      << "\" text-anchor=\"end\" font-size=\"11\">1</text>\n";
  svg << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kTop + plot_h + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << num(t_max) << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    const double x = kLeft + plot_w * r.curve[i].threshold / t_max;
    const double y = kTop + plot_h * (1.0 - r.curve[i].accuracy);
    svg << (i ? " " : "") << num(x) << ',' << num(y);
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  write_file(directory / "report.json", report_to_json(report));
  write_file(directory / "distances.csv", distances_csv(report));
  write_file(directory / "curve.svg", curve_svg(report));
}

}  // namespace spnet::eval

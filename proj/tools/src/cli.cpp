#include "spnet_tools/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "spnet/checkpoint.hpp"
#include "spnet/error.hpp"
#include "spnet/eval.hpp"
#include "spnet/image_io.hpp"
#include "spnet/poincare.hpp"
#include "spnet/synth.hpp"
#include "spnet/training.hpp"
#include "spnet_tools/annotation_server.hpp"

namespace spnet::tools {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kCheckpointName = "spnet.ckpt";
constexpr const char* kTrainLogName = "train_log.csv";
constexpr const char* kRunName = "run.json";

struct Size {
  std::size_t height = 0;
  std::size_t width = 0;
};

Size parse_size(const std::string& text) {
  const auto x = text.find('x');
  std::size_t h = 0, w = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    h = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    w = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw CLI::ValidationError("--size", "expected HxW, got '" + text + "'");
  }
  if (h == 0 || w == 0) throw CLI::ValidationError("--size", "dimensions must be positive");
  return {h, w};
}

json spec_json(const NetworkSpec& s) {
  return {{"input_height", s.input_height},         {"input_width", s.input_width},
          {"encoder_channels", s.encoder_channels}, {"hourglass_count", s.hourglass_count},
          {"hourglass_depth", s.hourglass_depth},   {"hourglass_channels", s.hourglass_channels},
          {"decoder_channels", s.decoder_channels}, {"mrn_channels", s.mrn_channels},
          {"mrn_dense", s.mrn_dense}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Echo of every option of a subcommand, for reproducibility.
json flags_json(const CLI::App& cmd) {
  json j = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_name() == "--help") continue;
    const auto& res = opt->results();
    std::string name = opt->get_name();
    name.erase(0, name.find_first_not_of('-'));
    if (opt->get_type_size() == 0) {
      j[name] = opt->count() > 0;
    } else if (res.size() == 1) {
      j[name] = res.front();
    } else if (res.empty()) {
      j[name] = opt->get_default_str();
    } else {
      j[name] = res;
    }
  }
  return j;
}

// Images named on the command line, or every image of a dataset directory.
std::vector<fs::path> collect_images(const std::string& data_dir,
                                     const std::vector<std::string>& files) {
  std::vector<fs::path> paths;
  if (!data_dir.empty()) {
    for (const auto& f : data::list_images(data_dir)) {
      paths.push_back(fs::path(data_dir) / data::kImagesDir / f);
    }
  }
  for (const auto& f : files) paths.emplace_back(f);
  return paths;
}

data::Sample load_sample(const fs::path& path) {
  const data::GrayImage img = data::read_image(path);
  data::Sample s;
  s.id = path.filename().string();
  s.image = data::to_tensor(img);
  s.original_height = img.height;
  s.original_width = img.width;
  return s;
}

void emit_predictions(const std::string& out_path, const std::vector<data::ManifestRow>& rows,
                      std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    out << data::format_manifest(rows);
  } else {
    data::write_manifest(out_path, rows);
  }
}

// Options shared by several subcommands.
struct Options {
  // synth
  std::string out_dir;
  std::size_t count = 16;
  std::string size = "64x80";
  double wavelength = 9.0;
  double noise = 0.0;
  std::size_t margin = 8;
  std::uint64_t seed = 0;
  // train
  std::string data_dir;
  std::string phase = "all";
  std::string train_size = "256x320";
  std::size_t epochs = 100;
  std::size_t batch = 8;
  double lr = 0.0005;
  double split = 0.8;
  std::size_t half_width = 21;
  std::string init;
  bool save_optimizer = false;
  bool quiet = false;
  // predict / baseline
  std::string ckpt;
  std::string predict_size;
  std::vector<std::string> images;
  std::string out_file;
  std::size_t block = 8;
  std::size_t smooth = 2;
  double pair_blocks = 4.0;
  // eval
  std::string pred;
  std::string truth;
  double threshold = 20.0;
  std::string report_dir = "eval";
  std::string model_id;
  std::string dataset_id;
  // annotate
  int port = 7878;
  std::string ui_dir;
};

int cmd_synth(const Options& o, const CLI::App& cmd, std::ostream& out) {
  const Size size = parse_size(o.size);
  data::CorpusParams p;
  p.count = o.count;
  p.height = size.height;
  p.width = size.width;
  p.wavelength = o.wavelength;
  p.noise_sigma = o.noise;
  p.margin = o.margin;
  p.seed = o.seed;
  const auto samples = data::synth_corpus(p);
  data::write_dataset(o.out_dir, samples);
  write_text(fs::path(o.out_dir) / "synth.json", json{{"flags", flags_json(cmd)}}.dump(2) + "\n");
  out << "wrote " << samples.size() << " images to " << o.out_dir << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, const CLI::App& cmd, std::ostream& out, std::ostream& err) {
  const Size size = parse_size(o.train_size);
  const bool run1 = o.phase == "1" || o.phase == "all";
  const bool run2 = o.phase == "2" || o.phase == "all";

  training::TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.input_height = size.height;
  cfg.input_width = size.width;
  cfg.split_fraction = o.split;
  cfg.seed = o.seed;
  cfg.mask_half_width = o.half_width;
  cfg.validate();

  data::LoadResult loaded = data::load_dataset(o.data_dir);
  for (const auto& w : loaded.warnings) err << "warning: " << w << "\n";
  std::vector<data::Sample> annotated;
  std::size_t excluded = 0;
  for (auto& s : loaded.samples) {
    if (s.annotation) annotated.push_back(std::move(s));
    else ++excluded;
  }
  if (excluded > 0) err << "excluded " << excluded << " images without a singular point\n";
  auto [train_set, test_set] = training::split_dataset(std::move(annotated), o.split, o.seed);

  const NetworkSpec spec = NetworkSpec::for_input(size.height, size.width);
  Mln mln(spec, o.seed);
  Mrn mrn(spec, o.seed + 1);
  if (!o.init.empty()) {
    const ParameterStore init = load_checkpoint(o.init);
    mln.parameters().load_from(init, true);
    mrn.parameters().load_from(init, true);
  }

  const fs::path out_dir(o.out_dir);
  fs::create_directories(out_dir);
  auto progress = [&](const training::EpochRecord& r) {
    if (!o.quiet) {
      out << "phase " << r.phase << " epoch " << r.epoch + 1 << "/" << cfg.epochs << " loss "
          << std::setprecision(6) << r.mean_loss << " (" << std::setprecision(3) << r.seconds
          << "s)\n"
          << std::flush;
    }
    return true;
  };
  training::TrainLog log;
  if (run1) {
    const auto l = training::train_phase1(mln, train_set, cfg, progress);
    log.epochs.insert(log.epochs.end(), l.epochs.begin(), l.epochs.end());
  }
  if (run2) {
    const auto l = training::train_phase2(mrn, train_set, cfg, progress);
    log.epochs.insert(log.epochs.end(), l.epochs.begin(), l.epochs.end());
  }

  const ParameterStore* stores[] = {&mln.parameters(), &mrn.parameters()};
  save_checkpoint(stores, out_dir / kCheckpointName, o.save_optimizer);
  training::write_train_log(out_dir / kTrainLogName, log);

  json ids_train = json::array(), ids_test = json::array();
  for (const auto& s : train_set) ids_train.push_back(s.id);
  for (const auto& s : test_set) ids_test.push_back(s.id);
  const json run{{"flags", flags_json(cmd)},
                 {"spec", spec_json(spec)},
                 {"train_ids", ids_train},
                 {"test_ids", ids_test},
                 {"excluded_unannotated", excluded},
                 {"skipped_unreadable", loaded.skipped_unreadable}};
  write_text(out_dir / kRunName, run.dump(2) + "\n");
  out << "wrote " << (out_dir / kCheckpointName).string() << "\n";
  return kExitOk;
}

// --size, else the size recorded in run.json beside the checkpoint, else the
// full-size default.
Size predict_size(const Options& o) {
  if (!o.predict_size.empty()) return parse_size(o.predict_size);
  const fs::path run = fs::path(o.ckpt).parent_path() / kRunName;
  std::ifstream in(run);
  if (in) {
    const json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("spec")) {
      return {j["spec"].value("input_height", std::size_t{256}),
              j["spec"].value("input_width", std::size_t{320})};
    }
  }
  return {256, 320};
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  const Size size = predict_size(o);
  const NetworkSpec spec = NetworkSpec::for_input(size.height, size.width);
  Mln mln(spec, 0);
  Mrn mrn(spec, 0);
  const ParameterStore weights = load_checkpoint(o.ckpt);
  mln.parameters().load_from(weights);
  mrn.parameters().load_from(weights);
  const SpNet net = training::stack(mln, mrn);

  std::vector<data::ManifestRow> rows;
  for (const auto& path : collect_images(o.data_dir, o.images)) {
    data::Sample s;
    try {
      s = load_sample(path);
    } catch (const UnreadableImageError& e) {
      err << "warning: skipping " << path.string() << ": " << e.what() << "\n";
      continue;
    }
    const data::Sample in = data::resize_sample(s, size.height, size.width);
    const Detection d = net.detect(in.image).detection;
    rows.push_back({s.id, in.to_original({d.x, d.y})});
  }
  emit_predictions(o.out_file, rows, out);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  eval::ReportOptions ro;
  ro.threshold = o.threshold;
  ro.model_id = o.model_id.empty() ? o.pred : o.model_id;
  ro.dataset_id = o.dataset_id.empty() ? o.truth : o.dataset_id;
  const eval::EvalReport report =
      eval::build_report(data::read_manifest(o.pred), data::read_manifest(o.truth), ro);
  eval::emit_report(report, o.report_dir);
  std::size_t hits = 0;
  for (const auto& s : report.samples) {
    if (s.distance && *s.distance <= o.threshold) ++hits;
  }
  out << "TDR@" << o.threshold << ": " << report.tdr << " (" << hits << "/" << report.samples.size()
      << ")";
  if (report.missing_predictions > 0) out << ", " << report.missing_predictions << " missing";
  if (report.unannotated > 0) out << ", " << report.unannotated << " unannotated excluded";
  out << "\nwrote " << o.report_dir << "\n";
  return kExitOk;
}

int cmd_baseline(const Options& o, std::ostream& out, std::ostream& err) {
  baseline::BaselineConfig cfg;
  cfg.block_size = o.block;
  cfg.smooth_iterations = o.smooth;
  cfg.core_pair_blocks = o.pair_blocks;
  std::vector<data::ManifestRow> rows;
  for (const auto& path : collect_images(o.data_dir, o.images)) {
    data::Sample s;
    try {
      s = load_sample(path);
    } catch (const UnreadableImageError& e) {
      err << "warning: skipping " << path.string() << ": " << e.what() << "\n";
      continue;
    }
    data::ManifestRow row{s.id, std::nullopt};
    try {
      // Detections come sorted whorl, core, delta; deltas are not reported.
      for (const auto& d : baseline::detect_singularities(s.image, cfg)) {
        if (d.kind != baseline::SingularityClass::Delta) {
          row.point = data::Point{d.x, d.y};
          break;
        }
      }
    } catch (const TooSmallImageError& e) {
      err << "warning: " << s.id << ": " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  emit_predictions(o.out_file, rows, out);
  return kExitOk;
}

int cmd_annotate(const Options& o, std::ostream& out) {
  AnnotationServer server(o.data_dir, o.ui_dir);
  out << "serving " << server.image_count() << " images at http://127.0.0.1:" << o.port << "/\n"
      << std::flush;
  if (!server.listen(o.port)) throw IoError("cannot listen on 127.0.0.1:" + std::to_string(o.port));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SP-Net singular-point detector toolkit", "spnet"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic whorl corpus");
  synth->add_option("--out", o.out_dir, "dataset directory to create")->required();
  synth->add_option("--count", o.count, "number of images")->capture_default_str();
  synth->add_option("--size", o.size, "image size HxW")->capture_default_str();
  synth->add_option("--wavelength", o.wavelength, "ridge period in pixels")->capture_default_str();
  synth->add_option("--noise", o.noise, "gaussian noise sigma")->capture_default_str();
  synth->add_option("--margin", o.margin, "minimum center distance to the border")
      ->capture_default_str();
  synth->add_option("--seed", o.seed, "random seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "train the localization and regression networks");
  train->add_option("--data", o.data_dir, "dataset directory")->required();
  train->add_option("--out", o.out_dir, "output directory for spnet.ckpt and logs")->required();
  train->add_option("--phase", o.phase, "1, 2 or all")
      ->check(CLI::IsMember({"1", "2", "all"}))
      ->capture_default_str();
  train->add_option("--size", o.train_size, "network input size HxW")->capture_default_str();
  train->add_option("--epochs", o.epochs, "epochs per phase")->capture_default_str();
  train->add_option("--batch", o.batch, "mini-batch size")->capture_default_str();
  train->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--split", o.split, "training fraction")->capture_default_str();
  train->add_option("--seed", o.seed, "random seed")->capture_default_str();
  train->add_option("--half-width", o.half_width, "ground-truth mask half-width")
      ->capture_default_str();
  train->add_option("--init", o.init, "checkpoint to start from");
  train->add_flag("--save-optimizer", o.save_optimizer, "store Adam state in the checkpoint");
  train->add_flag("--quiet", o.quiet, "no per-epoch output");

  auto* predict = app.add_subcommand("predict", "detect singular points with a checkpoint");
  predict->add_option("--ckpt", o.ckpt, "checkpoint file")->required();
  predict->add_option("--data", o.data_dir, "dataset directory (all of images/)");
  predict->add_option("images", o.images, "image files");
  predict->add_option("--size", o.predict_size, "network input size HxW (default: from run.json)");
  predict->add_option("--out", o.out_file, "prediction CSV (default stdout)");

  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  ev->add_option("--pred", o.pred, "prediction CSV")->required();
  ev->add_option("--truth", o.truth, "ground_truth.csv")->required();
  ev->add_option("--threshold", o.threshold, "true-detection radius in pixels")
      ->capture_default_str();
  ev->add_option("--out", o.report_dir, "report directory")->capture_default_str();
  ev->add_option("--model-id", o.model_id, "model label echoed in the report");
  ev->add_option("--dataset-id", o.dataset_id, "dataset label echoed in the report");

  auto* base = app.add_subcommand("baseline", "Poincare-index detector");
  base->add_option("--data", o.data_dir, "dataset directory (all of images/)");
  base->add_option("images", o.images, "image files");
  base->add_option("--out", o.out_file, "prediction CSV (default stdout)");
  base->add_option("--block", o.block, "orientation block size")->capture_default_str();
  base->add_option("--smooth", o.smooth, "smoothing iterations")->capture_default_str();
  base->add_option("--pair-blocks", o.pair_blocks,
                   "core pairs closer than this many blocks merge into a whorl")
      ->capture_default_str();

  auto* annotate = app.add_subcommand("annotate", "serve the annotation API and UI");
  annotate->add_option("--data", o.data_dir, "dataset directory")->required();
  annotate->add_option("--port", o.port, "localhost port")->capture_default_str();
  annotate->add_option("--ui", o.ui_dir, "directory with the UI bundle (index.html)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    for (auto* c : {predict, base}) {
      if (c->parsed() && o.data_dir.empty() && o.images.empty()) {
        throw CLI::RequiredError(c->get_name() + ": give --data DIR or image files");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, *synth, out);
    if (train->parsed()) return cmd_train(o, *train, out, err);
    if (predict->parsed()) return cmd_predict(o, out, err);
    if (ev->parsed()) return cmd_eval(o, out);
    if (base->parsed()) return cmd_baseline(o, out, err);
    if (annotate->parsed()) return cmd_annotate(o, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace spnet::tools

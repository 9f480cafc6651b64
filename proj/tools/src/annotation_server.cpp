#include "spnet_tools/annotation_server.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "spnet/error.hpp"
#include "spnet/image_io.hpp"

namespace spnet::tools {

namespace {

using nlohmann::json;

constexpr const char* kHost = "127.0.0.1";

constexpr const char* kFallbackPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>spnet annotate</title></head>
<body>
<h1>spnet annotation server</h1>
<p>No UI bundle was given (<code>--ui DIR</code>). The API is live:</p>
<ul>
<li><a href="/api/images">GET /api/images</a></li>
<li>GET /api/image/{id}</li>
<li>PUT /api/annotation/{id} with {"x": .., "y": ..} or {"none": true}</li>
</ul>
</body></html>
)html";

std::optional<std::string> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json record_json(const AnnotationRecord& r) {
  json j{{"id", r.id}, {"filename", r.filename}, {"state", state_name(r.state)}};
  if (r.point) {
    j["x"] = r.point->x;
    j["y"] = r.point->y;
  }
  return j;
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

const char* state_name(AnnotationState s) {
  switch (s) {
    case AnnotationState::Unlabeled: return "unlabeled";
    case AnnotationState::Labeled: return "labeled";
    case AnnotationState::NoSingularPoint: return "no_sp";
  }
  return "unknown";
}

struct AnnotationServer::Impl {
  std::filesystem::path dir;
  std::filesystem::path manifest_path;
  httplib::Server server;

  std::mutex mutex;
  std::vector<AnnotationRecord> records;
  std::map<std::string, std::size_t> by_id;
  // Rows naming files outside the image list; written back untouched.
  std::vector<data::ManifestRow> foreign_rows;
  std::optional<std::size_t> manifest_hash;  // empty: no manifest on disk

  Impl(std::filesystem::path d, const std::filesystem::path& ui_dir)
      : dir(std::move(d)), manifest_path(dir / data::kManifestName) {
    const std::vector<std::string> files = data::list_images(dir);
    std::map<std::string, std::size_t> stem_count;
    for (const auto& f : files) ++stem_count[std::filesystem::path(f).stem().string()];
    for (const auto& f : files) {
      const std::string stem = std::filesystem::path(f).stem().string();
      AnnotationRecord r;
      r.filename = f;
      r.id = stem_count[stem] == 1 ? stem : f;
      by_id.emplace(r.id, records.size());
      records.push_back(std::move(r));
    }
    reload();
    routes(ui_dir);
  }

  // Caller holds the mutex (or is the constructor).
  void reload() {
    const auto text = read_bytes(manifest_path);
    manifest_hash.reset();
    foreign_rows.clear();
    for (auto& r : records) {
      r.state = AnnotationState::Unlabeled;
      r.point.reset();
    }
    if (!text) return;
    manifest_hash = std::hash<std::string>{}(*text);
    std::map<std::string, std::size_t> by_file;
    for (std::size_t i = 0; i < records.size(); ++i) by_file.emplace(records[i].filename, i);
    for (auto& row : data::parse_manifest(*text)) {
      const auto it = by_file.find(row.filename);
      if (it == by_file.end()) {
        foreign_rows.push_back(std::move(row));
        continue;
      }
      AnnotationRecord& r = records[it->second];
      r.point = row.point;
      r.state = row.point ? AnnotationState::Labeled : AnnotationState::NoSingularPoint;
    }
  }

  std::optional<std::size_t> disk_hash() const {
    const auto text = read_bytes(manifest_path);
    if (!text) return std::nullopt;
    return std::hash<std::string>{}(*text);
  }

  void persist() {
    std::vector<data::ManifestRow> rows;
    for (const auto& r : records) {
      if (r.state != AnnotationState::Unlabeled) rows.push_back({r.filename, r.point});
    }
    rows.insert(rows.end(), foreign_rows.begin(), foreign_rows.end());
    data::write_manifest(manifest_path, rows);
    manifest_hash = disk_hash();
  }

  void routes(const std::filesystem::path& ui_dir) {
    server.Get("/api/images", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mutex);
      json list = json::array();
      for (const auto& r : records) list.push_back(record_json(r));
      res.set_content(list.dump(), "application/json");
    });

    server.Get(R"(/api/image/([^/]+))", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      std::string filename;
      {
        std::lock_guard lock(mutex);
        const auto it = by_id.find(req.matches[1].str());
        if (it == by_id.end()) return send_error(res, 404, "unknown image id");
        filename = records[it->second].filename;
      }
      const auto bytes = read_bytes(dir / data::kImagesDir / filename);
      if (!bytes) return send_error(res, 404, "image file is gone");
      const bool png = std::filesystem::path(filename).extension() == ".png";
      res.set_content(*bytes, png ? "image/png" : "image/x-portable-graymap");
    });

    server.Put(R"(/api/annotation/([^/]+))", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
      std::lock_guard lock(mutex);
      const auto it = by_id.find(req.matches[1].str());
      if (it == by_id.end()) return send_error(res, 404, "unknown image id");
      AnnotationRecord& rec = records[it->second];

      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        return send_error(res, 400, "body must be a JSON object");
      }
      std::optional<data::Point> point;
      if (body.contains("none")) {
        if (body.at("none") != true || body.contains("x") || body.contains("y")) {
          return send_error(res, 400, R"(expected {"none": true})");
        }
      } else {
        if (!body.contains("x") || !body.contains("y") || !body.at("x").is_number() ||
            !body.at("y").is_number()) {
          return send_error(res, 400, R"(expected {"x": number, "y": number})");
        }
        const double x = body.at("x").get<double>();
        const double y = body.at("y").get<double>();
        data::GrayImage img;
        try {
          img = data::read_image(dir / data::kImagesDir / rec.filename);
        } catch (const Error& e) {
          return send_error(res, 500, e.what());
        }
        if (!std::isfinite(x) || !std::isfinite(y) || x < 0 || y < 0 ||
            x >= static_cast<double>(img.width) || y >= static_cast<double>(img.height)) {
          return send_error(res, 400, "coordinates outside the " + std::to_string(img.width) +
                                          "x" + std::to_string(img.height) + " image");
        }
        point = data::Point{x, y};
      }

      if (disk_hash() != manifest_hash) {
        try {
          reload();
        } catch (const Error& e) {
          return send_error(res, 409, std::string("manifest changed on disk: ") + e.what());
        }
        return send_error(res, 409, "manifest changed on disk; session reloaded, retry");
      }
      const AnnotationRecord before = rec;
      rec.point = point;
      rec.state = point ? AnnotationState::Labeled : AnnotationState::NoSingularPoint;
      try {
        persist();
      } catch (const Error& e) {
        rec = before;
        return send_error(res, 500, e.what());
      }
      res.set_content(record_json(rec).dump(), "application/json");
    });

    if (!ui_dir.empty() && std::filesystem::exists(ui_dir / "index.html")) {
      server.set_mount_point("/", ui_dir.string());
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kFallbackPage, "text/html; charset=utf-8");
      });
    }
  }
};

AnnotationServer::AnnotationServer(std::filesystem::path dataset_dir, std::filesystem::path ui_dir)
    : impl_(std::make_unique<Impl>(std::move(dataset_dir), ui_dir)) {}

AnnotationServer::~AnnotationServer() = default;

bool AnnotationServer::listen(int port) { return impl_->server.listen(kHost, port); }
int AnnotationServer::bind_to_any_port() { return impl_->server.bind_to_any_port(kHost); }
bool AnnotationServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void AnnotationServer::stop() { impl_->server.stop(); }
bool AnnotationServer::is_running() const { return impl_->server.is_running(); }
std::size_t AnnotationServer::image_count() const { return impl_->records.size(); }

}  // namespace spnet::tools

#include "spnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "spnet/error.hpp"
#include "spnet/image_io.hpp"
#include "spnet/resize.hpp"

namespace spnet::data {

namespace fs = std::filesystem;

// Bilinear resizing samples at pixel centers, so coordinates map through
// (c + 0.5) * scale - 0.5.
Point Sample::to_input(Point original) const {
  return {(original.x + 0.5) * scale_x - 0.5, (original.y + 0.5) * scale_y - 0.5};
}

Point Sample::to_original(Point input) const {
  return {(input.x + 0.5) / scale_x - 0.5, (input.y + 0.5) / scale_y - 0.5};
}

std::optional<Point> Sample::input_annotation() const {
  if (!annotation) return std::nullopt;
  Point p = to_input(*annotation);
  p.x = std::clamp(p.x, 0.0, static_cast<double>(width()) - 1.0);
  p.y = std::clamp(p.y, 0.0, static_cast<double>(height()) - 1.0);
  return p;
}

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<ManifestRow> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (line.empty()) continue;
    if (!header) {
      if (line != "filename,x,y") throw MalformedRowError(line_no, "expected header 'filename,x,y'");
      header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 3) throw MalformedRowError(line_no, "expected 3 fields");
    if (fields[0].empty()) throw MalformedRowError(line_no, "empty filename");
    if (!seen.insert(fields[0]).second) throw MalformedRowError(line_no, "duplicate filename " + fields[0]);
    ManifestRow row{fields[0], std::nullopt};
    if (fields[1].empty() != fields[2].empty()) {
      throw MalformedRowError(line_no, "x and y must both be present or both empty");
    }
    if (!fields[1].empty()) {
      const auto x = parse_number(fields[1]);
      const auto y = parse_number(fields[2]);
      if (!x || !y) throw MalformedRowError(line_no, "non-numeric coordinate");
      if (*x < 0.0 || *y < 0.0) throw MalformedRowError(line_no, "negative coordinate");
      row.point = Point{*x, *y};
    }
    rows.push_back(std::move(row));
  }
  if (!header) throw MalformedRowError(1, "missing header 'filename,x,y'");
  return rows;
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingManifestError("manifest not found: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text);
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = "filename,x,y\n";
  for (const auto& r : rows) {
    out += r.filename;
    if (r.point) {
      out += "," + format_number(r.point->x) + "," + format_number(r.point->y) + "\n";
    } else {
      out += ",,\n";
    }
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const std::string text = format_manifest(rows);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::vector<std::string> list_images(const fs::path& dir) {
  std::vector<std::string> names;
  const fs::path images = dir / kImagesDir;
  std::error_code ec;
  if (!fs::is_directory(images, ec)) return names;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && is_supported_image(entry.path())) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

LoadResult load_dataset(const fs::path& dir) {
  const std::vector<ManifestRow> rows = read_manifest(dir / kManifestName);
  const std::vector<std::string> names = list_images(dir);
  const std::set<std::string> present(names.begin(), names.end());

  LoadResult result;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!present.count(rows[i].filename)) {
      // +2: one for the header, one for 1-based numbering.
      throw MalformedRowError(i + 2, "image not found: " + rows[i].filename);
    }
  }
  for (const auto& name : names) {
    GrayImage img;
    try {
      img = read_image(dir / kImagesDir / name);
    } catch (const UnreadableImageError& e) {
      ++result.skipped_unreadable;
      result.warnings.push_back(e.what());
      continue;
    }
    Sample s;
    s.id = name;
    s.image = to_tensor(img);
    s.original_height = img.height;
    s.original_width = img.width;
    const auto row = std::find_if(rows.begin(), rows.end(),
                                  [&](const ManifestRow& r) { return r.filename == name; });
    if (row != rows.end() && row->point) {
      const Point p = *row->point;
      if (p.x >= static_cast<double>(img.width) || p.y >= static_cast<double>(img.height)) {
        throw MalformedRowError(static_cast<std::size_t>(row - rows.begin()) + 2,
                                "annotation outside image " + name);
      }
      s.annotation = p;
    }
    result.samples.push_back(std::move(s));
  }
  return result;
}

Sample resize_sample(const Sample& sample, std::size_t height, std::size_t width) {
  ResizeResult r = resize_bilinear(sample.image, height, width);
  Sample out = sample;
  out.image = std::move(r.image);
  out.scale_y = static_cast<double>(height) / static_cast<double>(sample.original_height);
  out.scale_x = static_cast<double>(width) / static_cast<double>(sample.original_width);
  return out;
}

}  // namespace spnet::data

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spnet/tensor.hpp"

namespace spnet::data {

// Pixel coordinate: origin top-left, x rightward, y downward.
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Sample {
  std::string id;  // file name relative to images/
  Tensor image;    // [1, 1, H, W] in [0, 1]
  std::optional<Point> annotation;  // original-image pixels
  std::size_t original_height = 0;
  std::size_t original_width = 0;
  double scale_y = 1.0;  // image height / original height
  double scale_x = 1.0;

  std::size_t height() const { return image.dim(2); }
  std::size_t width() const { return image.dim(3); }

  // Annotation mapped into the current image's pixel space.
  std::optional<Point> input_annotation() const;
  Point to_input(Point original) const;
  Point to_original(Point input) const;
};

// One ground_truth.csv row; an empty point marks "no singular point".
struct ManifestRow {
  std::string filename;
  std::optional<Point> point;
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline constexpr const char* kManifestName = "ground_truth.csv";
inline constexpr const char* kImagesDir = "images";

// Header "filename,x,y"; UTF-8, LF. Throws MissingManifestError or
// MalformedRowError.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
std::vector<ManifestRow> parse_manifest(const std::string& text);
std::string format_manifest(const std::vector<ManifestRow>& rows);
// Write to a temporary sibling, then rename over the target.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

struct LoadResult {
  std::vector<Sample> samples;
  std::size_t skipped_unreadable = 0;
  std::vector<std::string> warnings;
};

// Loads <dir>/images/*.png|*.pgm (sorted by name) and attaches annotations
// from <dir>/ground_truth.csv. Images without a row load unannotated;
// unreadable images are skipped and counted. A row naming a missing image,
// or a point outside its image, is a MalformedRowError.
LoadResult load_dataset(const std::filesystem::path& dir);

// Lists <dir>/images/*.png|*.pgm sorted by name.
std::vector<std::string> list_images(const std::filesystem::path& dir);

// Resizes the image to the network input size and records the scale factors.
Sample resize_sample(const Sample& sample, std::size_t height, std::size_t width);

}  // namespace spnet::data

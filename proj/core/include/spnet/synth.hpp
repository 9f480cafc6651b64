#pragma once

#include <cstdint>
#include <vector>

#include "spnet/dataset.hpp"

namespace spnet::data {

enum class PatternKind { Whorl, Parallel };

struct SyntheticParams {
  PatternKind kind = PatternKind::Whorl;
  double center_x = 0.0;  // whorl only
  double center_y = 0.0;
  double wavelength = 9.0;  // ridge period, pixels
  // Parallel only: direction of the intensity wave; ridges run perpendicular
  // to it, at angle + pi/2.
  double angle = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

// Whorl: I = 0.5 + 0.5 cos(2 pi r / wavelength) + noise, r the distance to
// the center, annotated with the center. Parallel: a plane wave, no
// annotation. Values are clamped to [0, 1]. Throws InvalidParamsError.
Sample synth_fingerprint(const SyntheticParams& params, std::size_t height, std::size_t width);

struct CorpusParams {
  std::size_t count = 16;
  std::size_t height = 64;
  std::size_t width = 80;
  double wavelength = 9.0;
  double noise_sigma = 0.0;
  // Whorl centers are drawn with integer coordinates at least this far from
  // every border.
  std::size_t margin = 8;
  std::uint64_t seed = 0;
};

// Whorls with random centers; sample i is named synth_<i>.png.
std::vector<Sample> synth_corpus(const CorpusParams& params);

// Writes images/*.png plus ground_truth.csv.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

}  // namespace spnet::data

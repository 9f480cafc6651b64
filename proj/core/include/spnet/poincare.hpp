#pragma once

#include <cstddef>
#include <numbers>
#include <vector>

#include "spnet/tensor.hpp"

// Classical singular-point detector: block orientation field, doubled-angle
// smoothing, Poincare index around the 8-neighbour loop.
namespace spnet::baseline {

// Block-wise ridge orientation in [0, pi) with a coherence in [0, 1].
struct OrientationField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t block_size = 8;
  std::vector<double> theta;
  std::vector<double> coherence;

  OrientationField() = default;
  OrientationField(std::size_t rows, std::size_t cols, std::size_t block_size);

  double& at(std::size_t i, std::size_t j) { return theta[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return theta[i * cols + j]; }
  // Pixel coordinates of the center of block (i, j).
  double center_x(std::size_t j) const;
  double center_y(std::size_t i) const;
};

// Least-squares orientation from Sobel gradients:
// theta = atan2(sum 2 GxGy, sum Gx^2 - Gy^2) / 2 + pi/2 (mod pi). Grid is
// ceil(H / block) x ceil(W / block). image [1, 1, H, W]; needs at least three
// blocks per side (TooSmallImageError).
OrientationField orientation_field(const Tensor& image, std::size_t block_size = 8);

// 3x3 box average in (cos 2theta, sin 2theta), repeated `iterations` times.
// Coherence is carried over unchanged.
OrientationField smooth_field(const OrientationField& field, std::size_t iterations);

// Wraps an orientation difference into (-pi/2, pi/2].
double wrap_orientation_delta(double delta);

// Sum of wrapped orientation differences around the 8 neighbours of an
// interior block, traversed with increasing image angle atan2(dy, dx) (y
// down). Whorl +2pi, core +pi, delta -pi. Border blocks throw BorderBlockError.
double poincare_index(const OrientationField& field, std::size_t i, std::size_t j);

enum class SingularityClass { Core, Delta, Whorl };

const char* class_name(SingularityClass c);

struct Singularity {
  double x = 0.0;
  double y = 0.0;
  SingularityClass kind = SingularityClass::Core;
};

struct BaselineConfig {
  std::size_t block_size = 8;
  std::size_t smooth_iterations = 2;
  double class_tolerance = std::numbers::pi / 2;
  // A whorl's 2pi index tends to split into two cores under smoothing. Cores
  // closer than this many blocks to a whorl are absorbed by it; remaining
  // core pairs this close merge into a whorl at their midpoint. 0 disables.
  double core_pair_blocks = 4.0;
};

// Blocks whose index lies within the tolerance of pi / -pi / 2pi become
// core / delta / whorl candidates at the block center; 8-connected candidates
// of one class merge to their centroid, then close cores are paired into
// whorls (see BaselineConfig). Sorted whorl, core, delta, then by position.
std::vector<Singularity> detect_singularities(const Tensor& image, const BaselineConfig& config = {});

}  // namespace spnet::baseline

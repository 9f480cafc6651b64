#include <algorithm>
#include <cmath>
#include <numbers>

#include "spnet/error.hpp"
#include "spnet/poincare.hpp"

namespace spnet::baseline {

namespace {

constexpr double kPi = std::numbers::pi;

double mod_pi(double a) {
  a = std::fmod(a, kPi);
  if (a < 0.0) a += kPi;
  if (a >= kPi) a -= kPi;
  return a;
}

}  // namespace

OrientationField::OrientationField(std::size_t r, std::size_t c, std::size_t b)
    : rows(r), cols(c), block_size(b), theta(r * c, 0.0), coherence(r * c, 0.0) {}

double OrientationField::center_x(std::size_t j) const {
  return static_cast<double>(j * block_size) + 0.5 * static_cast<double>(block_size - 1);
}

double OrientationField::center_y(std::size_t i) const {
  return static_cast<double>(i * block_size) + 0.5 * static_cast<double>(block_size - 1);
}

OrientationField orientation_field(const Tensor& image, std::size_t block_size) {
  require_rank4(image, "orientation_field");
  if (image.dim(0) != 1 || image.dim(1) != 1) {
    throw InvalidShapeError("orientation_field: expected [1, 1, H, W], got " +
                            shape_to_string(image.shape()));
  }
  if (block_size == 0) throw InvalidParamsError("orientation_field: block size must be positive");
  const std::size_t h = image.dim(2);
  const std::size_t w = image.dim(3);
  if (h < 3 * block_size || w < 3 * block_size) {
    throw TooSmallImageError("orientation_field: " + std::to_string(h) + "x" + std::to_string(w) +
                             " image has fewer than 3 blocks of " + std::to_string(block_size) +
                             " per side");
  }
  const float* px = image.ptr();
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return static_cast<double>(px[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)]);
  };

  const std::size_t rows = (h + block_size - 1) / block_size;
  const std::size_t cols = (w + block_size - 1) / block_size;
  std::vector<double> gxx(rows * cols, 0.0), gyy(rows * cols, 0.0), gxy(rows * cols, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto yi = static_cast<std::ptrdiff_t>(y);
      const auto xi = static_cast<std::ptrdiff_t>(x);
      const double gx = (at(yi - 1, xi + 1) + 2.0 * at(yi, xi + 1) + at(yi + 1, xi + 1)) -
                        (at(yi - 1, xi - 1) + 2.0 * at(yi, xi - 1) + at(yi + 1, xi - 1));
      const double gy = (at(yi + 1, xi - 1) + 2.0 * at(yi + 1, xi) + at(yi + 1, xi + 1)) -
                        (at(yi - 1, xi - 1) + 2.0 * at(yi - 1, xi) + at(yi - 1, xi + 1));
      const std::size_t b = (y / block_size) * cols + x / block_size;
      gxx[b] += gx * gx;
      gyy[b] += gy * gy;
      gxy[b] += gx * gy;
    }
  }

  OrientationField field(rows, cols, block_size);
  for (std::size_t b = 0; b < rows * cols; ++b) {
    const double dx = gxx[b] - gyy[b];
    const double dy = 2.0 * gxy[b];
    field.theta[b] = mod_pi(0.5 * std::atan2(dy, dx) + kPi / 2);
    const double energy = gxx[b] + gyy[b];
    field.coherence[b] = energy > 1e-12 ? std::min(1.0, std::hypot(dx, dy) / energy) : 0.0;
  }
  return field;
}

OrientationField smooth_field(const OrientationField& field, std::size_t iterations) {
  OrientationField cur = field;
  for (std::size_t it = 0; it < iterations; ++it) {
    OrientationField next = cur;
    for (std::size_t i = 0; i < cur.rows; ++i) {
      for (std::size_t j = 0; j < cur.cols; ++j) {
        double c = 0.0;
        double s = 0.0;
        const std::size_t i0 = i == 0 ? 0 : i - 1;
        const std::size_t j0 = j == 0 ? 0 : j - 1;
        const std::size_t i1 = std::min(i + 1, cur.rows - 1);
        const std::size_t j1 = std::min(j + 1, cur.cols - 1);
        for (std::size_t a = i0; a <= i1; ++a) {
          for (std::size_t b = j0; b <= j1; ++b) {
            c += std::cos(2.0 * cur.at(a, b));
            s += std::sin(2.0 * cur.at(a, b));
          }
        }
        // A cancelled neighbourhood keeps its own angle.
        if (std::hypot(c, s) > 1e-12) next.at(i, j) = mod_pi(0.5 * std::atan2(s, c));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace spnet::baseline

#pragma once

#include "spnet/tensor.hpp"

namespace spnet::data {

struct ResizeResult {
  Tensor image;
  double scale_y = 1.0;  // target / source
  double scale_x = 1.0;
};

// Bilinear resampling of [N, C, H, W] at pixel centers (half-pixel offsets,
// edge samples clamped). Targets smaller than 8x8 throw InvalidTargetError.
ResizeResult resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

}  // namespace spnet::data

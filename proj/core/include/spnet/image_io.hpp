#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spnet/tensor.hpp"

namespace spnet::data {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

// 8-bit PNG (any color type, converted to gray) or binary/ASCII PGM with
// maxval <= 255. Throws UnreadableImageError.
GrayImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

bool is_supported_image(const std::filesystem::path& path);

// [1, 1, H, W] with values in [0, 1].
Tensor to_tensor(const GrayImage& image);
// Clamps to [0, 1] and rounds to 8 bits.
GrayImage from_tensor(const Tensor& image);

}  // namespace spnet::data

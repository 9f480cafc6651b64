#include "spnet/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spnet/error.hpp"

namespace spnet::data {

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> t(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const std::size_t lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, src - 1);
    t[i] = {lo, hi, s - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

ResizeResult resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  require_rank4(image, "resize_bilinear");
  if (height < 8 || width < 8) {
    throw InvalidTargetError("resize target " + std::to_string(height) + "x" +
                             std::to_string(width) + " is smaller than 8x8");
  }
  const std::size_t sh = image.dim(2), sw = image.dim(3);
  ResizeResult r{Tensor({image.dim(0), image.dim(1), height, width}),
                 static_cast<double>(height) / static_cast<double>(sh),
                 static_cast<double>(width) / static_cast<double>(sw)};
  if (sh == height && sw == width) {
    r.image = image;
    return r;
  }
  const auto ty = taps(sh, height);
  const auto tx = taps(sw, width);
  const std::size_t planes = image.dim(0) * image.dim(1);
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = image.ptr() + p * sh * sw;
    float* dst = r.image.ptr() + p * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      const Tap& a = ty[y];
      for (std::size_t x = 0; x < width; ++x) {
        const Tap& b = tx[x];
        const double top = (1.0 - b.frac) * src[a.lo * sw + b.lo] + b.frac * src[a.lo * sw + b.hi];
        const double bot = (1.0 - b.frac) * src[a.hi * sw + b.lo] + b.frac * src[a.hi * sw + b.hi];
        dst[y * width + x] = static_cast<float>((1.0 - a.frac) * top + a.frac * bot);
      }
    }
  }
  return r;
}

}  // namespace spnet::data

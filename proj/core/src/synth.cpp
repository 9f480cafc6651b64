#include "spnet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "spnet/error.hpp"
#include "spnet/image_io.hpp"
#include "spnet/random.hpp"

namespace spnet::data {

Sample synth_fingerprint(const SyntheticParams& p, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw InvalidParamsError("image size must be positive");
  if (!(p.wavelength >= 4.0)) throw InvalidParamsError("wavelength must be at least 4 pixels");
  if (!(p.noise_sigma >= 0.0)) throw InvalidParamsError("noise sigma must be non-negative");
  const bool whorl = p.kind == PatternKind::Whorl;
  if (whorl && (p.center_x < 0.0 || p.center_y < 0.0 || p.center_x >= static_cast<double>(width) ||
                p.center_y >= static_cast<double>(height))) {
    throw InvalidParamsError("whorl center lies outside the image");
  }

  Rng rng(p.seed);
  Sample s;
  s.image = Tensor({1, 1, height, width});
  s.original_height = height;
  s.original_width = width;
  const double k = 2.0 * std::numbers::pi / p.wavelength;
  const double ca = std::cos(p.angle), sa = std::sin(p.angle);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const double phase = whorl ? std::hypot(fx - p.center_x, fy - p.center_y) : fx * ca + fy * sa;
      double v = 0.5 + 0.5 * std::cos(k * phase);
      if (p.noise_sigma > 0.0) v += p.noise_sigma * rng.normal();
      s.image[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  if (whorl) s.annotation = Point{p.center_x, p.center_y};
  return s;
}

std::vector<Sample> synth_corpus(const CorpusParams& params) {
  if (2 * params.margin >= params.height || 2 * params.margin >= params.width) {
    throw InvalidParamsError("margin leaves no room for whorl centers");
  }
  Rng rng(params.seed);
  std::vector<Sample> out;
  out.reserve(params.count);
  for (std::size_t i = 0; i < params.count; ++i) {
    SyntheticParams sp;
    sp.kind = PatternKind::Whorl;
    sp.wavelength = params.wavelength;
    sp.noise_sigma = params.noise_sigma;
    sp.center_x = static_cast<double>(params.margin + rng.below(params.width - 2 * params.margin));
    sp.center_y = static_cast<double>(params.margin + rng.below(params.height - 2 * params.margin));
    sp.seed = rng.next_u64();
    Sample s = synth_fingerprint(sp, params.height, params.width);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04zu.png", i);
    s.id = name;
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir / kImagesDir, ec);
  if (ec) throw IoError("cannot create " + (dir / kImagesDir).string() + ": " + ec.message());
  std::vector<ManifestRow> rows;
  for (const auto& s : samples) {
    const std::filesystem::path target = dir / kImagesDir / s.id;
    if (target.extension() == ".pgm") {
      write_pgm(target, from_tensor(s.image));
    } else {
      write_png(target, from_tensor(s.image));
    }
    if (s.annotation) rows.push_back({s.id, s.annotation});
  }
  write_manifest(dir / kManifestName, rows);
}

}  // namespace spnet::data

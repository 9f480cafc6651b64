#include "spnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spnet/error.hpp"

namespace spnet::data {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw UnreadableImageError(path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  GrayImage out;
  out.height = img.height;
  out.width = img.width;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw UnreadableImageError(path.string() + ": " + msg);
  }
  return out;
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableImageError("cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw UnreadableImageError(path.string() + ": not a PGM file");
  GrayImage out;
  std::size_t maxval = 0;
  try {
    out.width = std::stoul(pgm_token(in));
    out.height = std::stoul(pgm_token(in));
    maxval = std::stoul(pgm_token(in));
  } catch (const std::exception&) {
    throw UnreadableImageError(path.string() + ": malformed PGM header");
  }
  if (out.width == 0 || out.height == 0 || maxval == 0 || maxval > 255) {
    throw UnreadableImageError(path.string() + ": unsupported PGM dimensions or maxval");
  }
  out.pixels.resize(out.width * out.height);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(out.pixels.data()), static_cast<std::streamsize>(out.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(out.pixels.size())) {
      throw UnreadableImageError(path.string() + ": truncated PGM data");
    }
  } else {
    for (auto& p : out.pixels) {
      unsigned v = 0;
      if (!(in >> v) || v > maxval) throw UnreadableImageError(path.string() + ": bad PGM sample");
      p = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>((p * 255u + maxval / 2) / maxval);
  }
  return out;
}

}  // namespace

bool is_supported_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".pgm";
}

GrayImage read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw UnreadableImageError(path.string() + ": unsupported image format (PNG or PGM only)");
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + img.message);
  }
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor to_tensor(const GrayImage& image) {
  Tensor t({1, 1, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = static_cast<float>(image.pixels[i]) / 255.0f;
  return t;
}

GrayImage from_tensor(const Tensor& image) {
  require_rank4(image, "from_tensor");
  GrayImage out;
  out.height = image.dim(2);
  out.width = image.dim(3);
  out.pixels.resize(out.height * out.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

}  // namespace spnet::data

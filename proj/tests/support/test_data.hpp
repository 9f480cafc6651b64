#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "spnet/random.hpp"
#include "spnet/tensor.hpp"

namespace testing_support {

inline spnet::Tensor random_tensor(const spnet::Shape& shape, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0) {
  spnet::Rng rng(seed);
  spnet::Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("spnet_test_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support

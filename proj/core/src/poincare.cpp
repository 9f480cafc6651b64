#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <tuple>

#include "spnet/error.hpp"
#include "spnet/poincare.hpp"

namespace spnet::baseline {

namespace {

constexpr double kPi = std::numbers::pi;

// (dx, dy) with y pointing down, in order of increasing atan2(dy, dx).
constexpr std::array<std::array<int, 2>, 8> kLoop{{
    {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

double gap(const Singularity& a, const Singularity& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void merge_core_pairs(std::vector<Singularity>& found, double radius) {
  if (radius <= 0.0) return;
  std::vector<Singularity> whorls, cores, rest;
  for (const auto& s : found) {
    if (s.kind == SingularityClass::Whorl) whorls.push_back(s);
    else if (s.kind == SingularityClass::Core) cores.push_back(s);
    else rest.push_back(s);
  }
  std::erase_if(cores, [&](const Singularity& c) {
    return std::any_of(whorls.begin(), whorls.end(),
                       [&](const Singularity& w) { return gap(c, w) <= radius; });
  });
  // Closest pair first, until no pair is within the radius.
  while (cores.size() >= 2) {
    std::size_t bi = 0, bj = 1;
    for (std::size_t i = 0; i < cores.size(); ++i)
      for (std::size_t j = i + 1; j < cores.size(); ++j)
        if (gap(cores[i], cores[j]) < gap(cores[bi], cores[bj])) bi = i, bj = j;
    if (gap(cores[bi], cores[bj]) > radius) break;
    whorls.push_back({(cores[bi].x + cores[bj].x) / 2, (cores[bi].y + cores[bj].y) / 2,
                      SingularityClass::Whorl});
    cores.erase(cores.begin() + static_cast<std::ptrdiff_t>(bj));
    cores.erase(cores.begin() + static_cast<std::ptrdiff_t>(bi));
  }
  found = std::move(whorls);
  found.insert(found.end(), cores.begin(), cores.end());
  found.insert(found.end(), rest.begin(), rest.end());
}

}  // namespace

double wrap_orientation_delta(double delta) {
  delta = std::fmod(delta, kPi);
  if (delta <= -kPi / 2) delta += kPi;
  if (delta > kPi / 2) delta -= kPi;
  return delta;
}

double poincare_index(const OrientationField& field, std::size_t i, std::size_t j) {
  if (i == 0 || j == 0 || i + 1 >= field.rows || j + 1 >= field.cols) {
    throw BorderBlockError("poincare_index: block (" + std::to_string(i) + ", " +
                           std::to_string(j) + ") is on the border of a " +
                           std::to_string(field.rows) + "x" + std::to_string(field.cols) +
                           " field");
  }
  auto theta = [&](std::size_t k) {
    const auto& [dx, dy] = kLoop[k % kLoop.size()];
    return field.at(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + dy),
                    static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) + dx));
  };
  double sum = 0.0;
  for (std::size_t k = 0; k < kLoop.size(); ++k) {
    sum += wrap_orientation_delta(theta(k + 1) - theta(k));
  }
  return sum;
}

const char* class_name(SingularityClass c) {
  switch (c) {
    case SingularityClass::Core: return "core";
    case SingularityClass::Delta: return "delta";
    case SingularityClass::Whorl: return "whorl";
  }
  return "unknown";
}

std::vector<Singularity> detect_singularities(const Tensor& image, const BaselineConfig& config) {
  const OrientationField field =
      smooth_field(orientation_field(image, config.block_size), config.smooth_iterations);

  // 0 = none, else class + 1
  std::vector<int> label(field.rows * field.cols, 0);
  for (std::size_t i = 1; i + 1 < field.rows; ++i) {
    for (std::size_t j = 1; j + 1 < field.cols; ++j) {
      const double index = poincare_index(field, i, j);
      int cls = 0;
      if (std::abs(index - 2 * kPi) < config.class_tolerance) {
        cls = 1 + static_cast<int>(SingularityClass::Whorl);
      } else if (std::abs(index - kPi) < config.class_tolerance) {
        cls = 1 + static_cast<int>(SingularityClass::Core);
      } else if (std::abs(index + kPi) < config.class_tolerance) {
        cls = 1 + static_cast<int>(SingularityClass::Delta);
      }
      label[i * field.cols + j] = cls;
    }
  }

  std::vector<Singularity> out;
  std::vector<bool> seen(label.size(), false);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (label[start] == 0 || seen[start]) continue;
    const int cls = label[start];
    double sx = 0.0;
    double sy = 0.0;
    std::size_t count = 0;
    stack.assign(1, start);
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t b = stack.back();
      stack.pop_back();
      const std::size_t i = b / field.cols;
      const std::size_t j = b % field.cols;
      sx += field.center_x(j);
      sy += field.center_y(i);
      ++count;
      for (std::size_t a = i == 0 ? 0 : i - 1; a <= std::min(i + 1, field.rows - 1); ++a) {
        for (std::size_t c = j == 0 ? 0 : j - 1; c <= std::min(j + 1, field.cols - 1); ++c) {
          const std::size_t n = a * field.cols + c;
          if (!seen[n] && label[n] == cls) {
            seen[n] = true;
            stack.push_back(n);
          }
        }
      }
    }
    out.push_back({sx / static_cast<double>(count), sy / static_cast<double>(count),
                   static_cast<SingularityClass>(cls - 1)});
  }

  merge_core_pairs(out, config.core_pair_blocks * static_cast<double>(config.block_size));

  auto rank = [](SingularityClass c) {
    switch (c) {
      case SingularityClass::Whorl: return 0;
      case SingularityClass::Core: return 1;
      case SingularityClass::Delta: return 2;
    }
    return 3;
  };
  std::sort(out.begin(), out.end(), [&](const Singularity& a, const Singularity& b) {
    return std::tuple(rank(a.kind), a.y, a.x) < std::tuple(rank(b.kind), b.y, b.x);
  });
  return out;
}

}  // namespace spnet::baseline

#pragma once

#include <cstdint>

#include "spnet/tensor.hpp"

namespace spnet {

struct AdamHyperParams {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter tensor. Moments start at zero; step
// counts completed updates.
template <typename T>
struct BasicAdamState {
  BasicTensor<T> first_moment;
  BasicTensor<T> second_moment;
  std::uint64_t step = 0;

  static BasicAdamState for_shape(const Shape& shape) {
    return {BasicTensor<T>(shape), BasicTensor<T>(shape), 0};
  }
};

using AdamState = BasicAdamState<float>;

// One bias-corrected Adam update of param in place.
template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicAdamState<T>& state,
               const AdamHyperParams& hp);

}  // namespace spnet

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spnet/tensor.hpp"

// Dense kernels and their adjoints. Every forward op is a pure function; the
// matching *_backward takes the gradient of a scalar objective with respect to
// the op's output and returns gradients with respect to each input.
//
// Kernels are single-threaded and reduce every output element in a fixed
// order, so outputs are bit-identical across runs.
namespace spnet::ops {

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// Stride-1 "same" convolution. weights [Co, Ci, k, k] with k odd (3 in the
// networks, 1 for the mask head); zero padding k/2.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias);
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

// 3x3 transposed convolution, stride 2, padding 1, output padding 1:
// [N, Ci, H, W] -> [N, Co, 2H, 2W]. weights [Ci, Co, 3, 3].
template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                 const BasicTensor<T>& bias);
template <typename T>
ConvGrads<T> transposed_conv2d_backward(const BasicTensor<T>& input,
                                        const BasicTensor<T>& weights,
                                        const BasicTensor<T>& grad_out);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  // For each output element, the flat offset of the winning input element.
  std::vector<std::uint32_t> argmax;
};

// 2x2 max pool, stride 2. Ties go to the first element in row-major order.
template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                                  const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);
// Takes the sigmoid *output*.
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

// [N, F] x [F, G] + [G] -> [N, G]
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                     const BasicTensor<T>& bias);
template <typename T>
ConvGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                            const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
// Adjoint of concat_channels: first `channels_a` channels go to a, the rest to b.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& grad,
                                                         std::size_t channels_a);

template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> upsample_nearest2x_backward(const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct LossValue {
  T value = T(0);
  BasicTensor<T> grad;  // d value / d pred
};

inline constexpr double kBceEpsilon = 1e-7;

// Mean binary cross-entropy over every element. pred is clamped to
// [eps, 1 - eps]; gt must be 0 or 1. The gradient is evaluated at the clamped
// prediction.
template <typename T>
LossValue<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& gt);

// Gradient of bce_loss(sigmoid(logits), gt) with respect to the logits,
// (sigmoid(z) - gt) / count. Numerically stable when the sigmoid saturates.
template <typename T>
BasicTensor<T> bce_logit_grad(const BasicTensor<T>& probabilities, const BasicTensor<T>& gt);

// pred, gt: [n, 2]. value = (1/n) * sum_i |pred_i - gt_i|^2.
template <typename T>
LossValue<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& gt);

}  // namespace spnet::ops

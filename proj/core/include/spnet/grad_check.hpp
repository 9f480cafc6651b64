#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "spnet/tensor.hpp"

namespace spnet {

enum class GradOp {
  Conv2d,             // shapes: input, weights, bias
  TransposedConv2d,   // shapes: input, weights, bias
  MaxPool2d,          // shapes: input
  Relu,               // shapes: input
  Sigmoid,            // shapes: input
  Dense,              // shapes: input, weights, bias
  ConcatChannels,     // shapes: a, b
  UpsampleNearest2x,  // shapes: input
  Add,                // shapes: a, b
  BceLoss,            // shapes: pred (gt is drawn as random bits)
  MseLoss,            // shapes: pred, gt
};

inline constexpr GradOp kAllGradOps[] = {
    GradOp::Conv2d,         GradOp::TransposedConv2d,  GradOp::MaxPool2d, GradOp::Relu,
    GradOp::Sigmoid,        GradOp::Dense,             GradOp::ConcatChannels,
    GradOp::UpsampleNearest2x, GradOp::Add,            GradOp::BceLoss,   GradOp::MseLoss};

enum class Precision { Float32, Float64 };

std::string_view grad_op_name(GradOp op);

// Small shapes (a few hundred elements) that exercise each op.
std::vector<Shape> default_grad_shapes(GradOp op);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t elements_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
};

// Compares every adjoint partial derivative against a central finite
// difference of the scalar objective sum(r * op(inputs)) (or the loss value for
// the loss ops), r a fixed random projection. Step 1e-3 in 32-bit, 1e-6 in
// 64-bit. Error per element is |analytic - numeric| / max(|analytic|,
// |numeric|, floor), floor 1e-1 in 32-bit and 1e-3 in 64-bit, so that float
// rounding in near-zero partials is not reported as relative error.
//
// Inputs are drawn away from non-differentiable points (relu kinks, max-pool
// ties) so the central difference is well-defined.
GradCheckReport grad_check_report(GradOp op, std::span<const Shape> input_shapes,
                                  std::uint64_t seed, Precision precision = Precision::Float32);

double grad_check(GradOp op, std::span<const Shape> input_shapes, std::uint64_t seed,
                  Precision precision = Precision::Float32);

}  // namespace spnet

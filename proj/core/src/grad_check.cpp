#include "spnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "spnet/error.hpp"
#include "spnet/ops.hpp"
#include "spnet/random.hpp"

namespace spnet {

std::string_view grad_op_name(GradOp op) {
  switch (op) {
    case GradOp::Conv2d: return "conv2d";
    case GradOp::TransposedConv2d: return "transposed_conv2d";
    case GradOp::MaxPool2d: return "maxpool2d";
    case GradOp::Relu: return "relu";
    case GradOp::Sigmoid: return "sigmoid";
    case GradOp::Dense: return "dense";
    case GradOp::ConcatChannels: return "concat_channels";
    case GradOp::UpsampleNearest2x: return "upsample_nearest2x";
    case GradOp::Add: return "add";
    case GradOp::BceLoss: return "bce_loss";
    case GradOp::MseLoss: return "mse_loss";
  }
  return "unknown";
}

std::vector<Shape> default_grad_shapes(GradOp op) {
  switch (op) {
    case GradOp::Conv2d: return {{1, 2, 6, 6}, {3, 2, 3, 3}, {3}};
    case GradOp::TransposedConv2d: return {{1, 2, 3, 3}, {2, 3, 3, 3}, {3}};
    case GradOp::MaxPool2d: return {{1, 2, 6, 6}};
    case GradOp::Relu: return {{2, 3, 4, 4}};
    case GradOp::Sigmoid: return {{2, 3, 4, 4}};
    case GradOp::Dense: return {{3, 8}, {8, 5}, {5}};
    case GradOp::ConcatChannels: return {{1, 2, 3, 3}, {1, 3, 3, 3}};
    case GradOp::UpsampleNearest2x: return {{1, 2, 2, 3}};
    case GradOp::Add: return {{2, 3, 3}, {2, 3, 3}};
    case GradOp::BceLoss: return {{6, 6}};
    case GradOp::MseLoss: return {{5, 2}, {5, 2}};
  }
  return {};
}

namespace {

std::size_t expected_inputs(GradOp op) {
  switch (op) {
    case GradOp::Conv2d:
    case GradOp::TransposedConv2d:
    case GradOp::Dense: return 3;
    case GradOp::ConcatChannels:
    case GradOp::Add:
    case GradOp::MseLoss: return 2;
    default: return 1;
  }
}

template <typename T>
struct Problem {
  std::vector<BasicTensor<T>> inputs;
  BasicTensor<T> target;      // bce ground truth
  BasicTensor<T> projection;  // r, for tensor-valued ops
};

template <typename T>
BasicTensor<T> uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
BasicTensor<T> forward(GradOp op, const Problem<T>& p) {
  const auto& in = p.inputs;
  switch (op) {
    case GradOp::Conv2d: return ops::conv2d(in[0], in[1], in[2]);
    case GradOp::TransposedConv2d: return ops::transposed_conv2d(in[0], in[1], in[2]);
    case GradOp::MaxPool2d: return ops::maxpool2d(in[0]).output;
    case GradOp::Relu: return ops::relu(in[0]);
    case GradOp::Sigmoid: return ops::sigmoid(in[0]);
    case GradOp::Dense: return ops::dense(in[0], in[1], in[2]);
    case GradOp::ConcatChannels: return ops::concat_channels(in[0], in[1]);
    case GradOp::UpsampleNearest2x: return ops::upsample_nearest2x(in[0]);
    case GradOp::Add: return ops::add(in[0], in[1]);
    case GradOp::BceLoss: return BasicTensor<T>({1}, ops::bce_loss(in[0], p.target).value);
    case GradOp::MseLoss: return BasicTensor<T>({1}, ops::mse_loss(in[0], in[1]).value);
  }
  return {};
}

bool is_loss(GradOp op) { return op == GradOp::BceLoss || op == GradOp::MseLoss; }

template <typename T>
double objective(GradOp op, const Problem<T>& p) {
  const BasicTensor<T> out = forward(op, p);
  if (is_loss(op)) return static_cast<double>(out[0]);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    s += static_cast<double>(p.projection[i]) * static_cast<double>(out[i]);
  }
  return s;
}

template <typename T>
std::vector<BasicTensor<T>> adjoint(GradOp op, const Problem<T>& p) {
  const auto& in = p.inputs;
  const BasicTensor<T>& r = p.projection;
  switch (op) {
    case GradOp::Conv2d: {
      auto g = ops::conv2d_backward(in[0], in[1], r);
      return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
    }
    case GradOp::TransposedConv2d: {
      auto g = ops::transposed_conv2d_backward(in[0], in[1], r);
      return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
    }
    case GradOp::MaxPool2d: {
      auto pooled = ops::maxpool2d(in[0]);
      return {ops::maxpool2d_backward(in[0].shape(), pooled.argmax, r)};
    }
    case GradOp::Relu: return {ops::relu_backward(in[0], r)};
    case GradOp::Sigmoid: return {ops::sigmoid_backward(ops::sigmoid(in[0]), r)};
    case GradOp::Dense: {
      auto g = ops::dense_backward(in[0], in[1], r);
      return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
    }
    case GradOp::ConcatChannels: {
      auto [ga, gb] = ops::split_channels(r, in[0].dim(1));
      return {std::move(ga), std::move(gb)};
    }
    case GradOp::UpsampleNearest2x: return {ops::upsample_nearest2x_backward(r)};
    case GradOp::Add: return {r, r};
    case GradOp::BceLoss: return {ops::bce_loss(in[0], p.target).grad};
    case GradOp::MseLoss: {
      auto g = ops::mse_loss(in[0], in[1]).grad;
      BasicTensor<T> neg = g;
      for (auto& v : neg.data()) v = -v;
      return {std::move(g), std::move(neg)};
    }
  }
  return {};
}

template <typename T>
Problem<T> make_problem(GradOp op, std::span<const Shape> shapes, std::uint64_t seed) {
  Rng rng(seed);
  Problem<T> p;
  for (const Shape& s : shapes) {
    switch (op) {
      case GradOp::Sigmoid: p.inputs.push_back(uniform_tensor<T>(s, rng, -3.0, 3.0)); break;
      case GradOp::BceLoss: p.inputs.push_back(uniform_tensor<T>(s, rng, 0.05, 0.95)); break;
      case GradOp::MseLoss: p.inputs.push_back(uniform_tensor<T>(s, rng, 0.0, 1.0)); break;
      case GradOp::Relu: {
        // Keep every element at least 0.1 away from the kink.
        BasicTensor<T> t(s);
        for (auto& v : t.data()) {
          const double mag = rng.uniform(0.1, 1.0);
          v = static_cast<T>(rng.uniform() < 0.5 ? -mag : mag);
        }
        p.inputs.push_back(std::move(t));
        break;
      }
      case GradOp::MaxPool2d: {
        // Distinct values spaced 0.05 apart: no ties within any window.
        BasicTensor<T> t(s);
        const auto order = permutation(t.size(), rng);
        for (std::size_t i = 0; i < t.size(); ++i) {
          t[i] = static_cast<T>(0.05 * static_cast<double>(order[i]) - 1.0);
        }
        p.inputs.push_back(std::move(t));
        break;
      }
      default: p.inputs.push_back(uniform_tensor<T>(s, rng, -1.0, 1.0)); break;
    }
  }
  if (op == GradOp::BceLoss) {
    p.target = BasicTensor<T>(shapes[0]);
    for (auto& v : p.target.data()) v = rng.uniform() < 0.5 ? T(0) : T(1);
  }
  if (!is_loss(op)) {
    const BasicTensor<T> out = forward(op, p);
    p.projection = uniform_tensor<T>(out.shape(), rng, -1.0, 1.0);
  }
  return p;
}

template <typename T>
GradCheckReport run(GradOp op, std::span<const Shape> shapes, std::uint64_t seed, double step,
                    double floor) {
  Problem<T> p = make_problem<T>(op, shapes, seed);
  const std::vector<BasicTensor<T>> analytic = adjoint(op, p);
  // The bce target is not differentiable; mse's gt is.
  const std::size_t checked_inputs = analytic.size();

  GradCheckReport report;
  for (std::size_t k = 0; k < checked_inputs; ++k) {
    for (std::size_t i = 0; i < p.inputs[k].size(); ++i) {
      const T saved = p.inputs[k][i];
      // Divide by the step actually representable in T.
      const T up = static_cast<T>(static_cast<double>(saved) + step);
      const T down = static_cast<T>(static_cast<double>(saved) - step);
      p.inputs[k][i] = up;
      const double plus = objective(op, p);
      p.inputs[k][i] = down;
      const double minus = objective(op, p);
      p.inputs[k][i] = saved;

      const double numeric =
          (plus - minus) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = static_cast<double>(analytic[k][i]);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double err = std::abs(a - numeric) / denom;
      if (err > report.max_relative_error || report.elements_checked == 0) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        report.worst_input = k;
        report.worst_element = i;
      }
      ++report.elements_checked;
    }
  }
  return report;
}

}  // namespace

GradCheckReport grad_check_report(GradOp op, std::span<const Shape> input_shapes,
                                  std::uint64_t seed, Precision precision) {
  if (input_shapes.size() != expected_inputs(op)) {
    throw InvalidShapeError("grad_check: " + std::string(grad_op_name(op)) + " takes " +
                            std::to_string(expected_inputs(op)) + " input shapes");
  }
  if (precision == Precision::Float64) return run<double>(op, input_shapes, seed, 1e-6, 1e-3);
  return run<float>(op, input_shapes, seed, 1e-3, 1e-1);
}

double grad_check(GradOp op, std::span<const Shape> input_shapes, std::uint64_t seed,
                  Precision precision) {
  return grad_check_report(op, input_shapes, seed, precision).max_relative_error;
}

}  // namespace spnet

#include "spnet/tape.hpp"

#include "spnet/error.hpp"

namespace spnet {

Tape::Var Tape::push_owned(Tensor t) {
  owned_.push_back(std::move(t));
  slots_.push_back(Slot{&owned_.back(), nullptr});
  return Var{static_cast<std::uint32_t>(slots_.size() - 1)};
}

Tape::Var Tape::input(Tensor value) { return push_owned(std::move(value)); }

Tape::Var Tape::parameter(const Tensor& value, Tensor* grad) {
  slots_.push_back(Slot{&value, grad});
  return Var{static_cast<std::uint32_t>(slots_.size() - 1)};
}

Tape::Var Tape::conv2d(Var x, Var weight, Var bias) {
  Var out = push_owned(ops::conv2d(value(x), value(weight), value(bias)));
  if (record_) nodes_.push_back(Node{Kind::Conv2d, out.id, {x.id, weight.id, bias.id}, {}});
  return out;
}

Tape::Var Tape::transposed_conv2d(Var x, Var weight, Var bias) {
  Var out = push_owned(ops::transposed_conv2d(value(x), value(weight), value(bias)));
  if (record_) {
    nodes_.push_back(Node{Kind::TransposedConv2d, out.id, {x.id, weight.id, bias.id}, {}});
  }
  return out;
}

Tape::Var Tape::maxpool2d(Var x) {
  auto pooled = ops::maxpool2d(value(x));
  Var out = push_owned(std::move(pooled.output));
  if (record_) nodes_.push_back(Node{Kind::MaxPool2d, out.id, {x.id, 0, 0}, std::move(pooled.argmax)});
  return out;
}

Tape::Var Tape::relu(Var x) {
  Var out = push_owned(ops::relu(value(x)));
  if (record_) nodes_.push_back(Node{Kind::Relu, out.id, {x.id, 0, 0}, {}});
  return out;
}

Tape::Var Tape::sigmoid(Var x) {
  Var out = push_owned(ops::sigmoid(value(x)));
  if (record_) nodes_.push_back(Node{Kind::Sigmoid, out.id, {x.id, 0, 0}, {}});
  return out;
}

Tape::Var Tape::dense(Var x, Var weight, Var bias) {
  Var out = push_owned(ops::dense(value(x), value(weight), value(bias)));
  if (record_) nodes_.push_back(Node{Kind::Dense, out.id, {x.id, weight.id, bias.id}, {}});
  return out;
}

Tape::Var Tape::concat_channels(Var a, Var b) {
  Var out = push_owned(ops::concat_channels(value(a), value(b)));
  if (record_) nodes_.push_back(Node{Kind::Concat, out.id, {a.id, b.id, 0}, {}});
  return out;
}

Tape::Var Tape::upsample_nearest2x(Var x) {
  Var out = push_owned(ops::upsample_nearest2x(value(x)));
  if (record_) nodes_.push_back(Node{Kind::Upsample, out.id, {x.id, 0, 0}, {}});
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  Var out = push_owned(ops::add(value(a), value(b)));
  if (record_) nodes_.push_back(Node{Kind::Add, out.id, {a.id, b.id, 0}, {}});
  return out;
}

Tape::Var Tape::flatten(Var x) {
  const Tensor& v = value(x);
  const std::size_t n = v.dim(0);
  Var out = push_owned(v.reshaped({n, v.size() / n}));
  if (record_) nodes_.push_back(Node{Kind::Flatten, out.id, {x.id, 0, 0}, {}});
  return out;
}

void Tape::accumulate(std::uint32_t id, Tensor g) {
  if (Tensor* sink = slots_[id].param_grad) {
    if (sink->shape() != g.shape()) throw InvalidShapeError("Tape: parameter gradient shape");
    for (std::size_t i = 0; i < g.size(); ++i) (*sink)[i] += g[i];
    return;
  }
  Tensor& dst = grads_[id];
  if (dst.empty()) {
    dst = std::move(g);
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

void Tape::backward(Var out, Tensor seed) {
  if (!record_) throw Error("Tape::backward called on a non-recording tape");
  if (seed.shape() != value(out).shape()) {
    throw InvalidShapeError("Tape::backward: seed shape " + shape_to_string(seed.shape()) +
                            " does not match output " + shape_to_string(value(out).shape()));
  }
  grads_.assign(slots_.size(), Tensor{});
  grads_[out.id] = std::move(seed);

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = *it;
    if (grads_[node.out].empty()) continue;
    const Tensor g = std::move(grads_[node.out]);
    grads_[node.out] = Tensor{};
    const auto& in = node.in;
    switch (node.kind) {
      case Kind::Conv2d: {
        auto r = ops::conv2d_backward(value(Var{in[0]}), value(Var{in[1]}), g);
        accumulate(in[0], std::move(r.input));
        accumulate(in[1], std::move(r.weight));
        accumulate(in[2], std::move(r.bias));
        break;
      }
      case Kind::TransposedConv2d: {
        auto r = ops::transposed_conv2d_backward(value(Var{in[0]}), value(Var{in[1]}), g);
        accumulate(in[0], std::move(r.input));
        accumulate(in[1], std::move(r.weight));
        accumulate(in[2], std::move(r.bias));
        break;
      }
      case Kind::MaxPool2d:
        accumulate(in[0], ops::maxpool2d_backward(value(Var{in[0]}).shape(), node.argmax, g));
        break;
      case Kind::Relu: accumulate(in[0], ops::relu_backward(value(Var{in[0]}), g)); break;
      case Kind::Sigmoid:
        accumulate(in[0], ops::sigmoid_backward(value(Var{node.out}), g));
        break;
      case Kind::Dense: {
        auto r = ops::dense_backward(value(Var{in[0]}), value(Var{in[1]}), g);
        accumulate(in[0], std::move(r.input));
        accumulate(in[1], std::move(r.weight));
        accumulate(in[2], std::move(r.bias));
        break;
      }
      case Kind::Concat: {
        auto [ga, gb] = ops::split_channels(g, value(Var{in[0]}).dim(1));
        accumulate(in[0], std::move(ga));
        accumulate(in[1], std::move(gb));
        break;
      }
      case Kind::Upsample: accumulate(in[0], ops::upsample_nearest2x_backward(g)); break;
      case Kind::Add:
        accumulate(in[0], g);
        accumulate(in[1], g);
        break;
      case Kind::Flatten: accumulate(in[0], g.reshaped(value(Var{in[0]}).shape())); break;
    }
  }
  grads_.clear();
}

}  // namespace spnet

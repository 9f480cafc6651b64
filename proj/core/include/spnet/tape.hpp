#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "spnet/ops.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

// Linear record of the ops applied during one forward pass, replayed in
// reverse by backward(). Only the op set the networks need is supported.
class Tape {
 public:
  struct Var {
    std::uint32_t id = 0;
  };

  // When record is false no adjoint bookkeeping is kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor value);
  // References a parameter owned elsewhere; its gradient is accumulated into
  // `grad` (when non-null) during backward().
  Var parameter(const Tensor& value, Tensor* grad);

  Var conv2d(Var x, Var weight, Var bias);
  Var transposed_conv2d(Var x, Var weight, Var bias);
  Var maxpool2d(Var x);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var dense(Var x, Var weight, Var bias);
  Var concat_channels(Var a, Var b);
  Var upsample_nearest2x(Var x);
  Var add(Var a, Var b);
  Var flatten(Var x);

  const Tensor& value(Var v) const { return *slots_.at(v.id).value; }

  // Propagates `seed` (d objective / d out) back through every recorded op.
  void backward(Var out, Tensor seed);

 private:
  enum class Kind : std::uint8_t {
    Conv2d,
    TransposedConv2d,
    MaxPool2d,
    Relu,
    Sigmoid,
    Dense,
    Concat,
    Upsample,
    Add,
    Flatten,
  };

  struct Slot {
    const Tensor* value = nullptr;
    Tensor* param_grad = nullptr;
  };

  struct Node {
    Kind kind;
    std::uint32_t out;
    std::uint32_t in[3];
    std::vector<std::uint32_t> argmax;
  };

  Var push_owned(Tensor t);
  void accumulate(std::uint32_t id, Tensor g);

  bool record_;
  std::deque<Tensor> owned_;
  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace spnet

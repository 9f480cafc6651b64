#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spnet/parameter_store.hpp"
#include "spnet/random.hpp"
#include "spnet/tape.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

// Architecture hyper-parameters shared by the localization and regression
// networks. Defaults give the full-size 256x320 detector.
struct NetworkSpec {
  std::size_t input_height = 256;
  std::size_t input_width = 320;
  std::vector<std::size_t> encoder_channels{16, 64, 128};
  std::size_t hourglass_count = 3;
  std::size_t hourglass_depth = 3;
  std::size_t hourglass_channels = 128;
  std::vector<std::size_t> decoder_channels{128, 64, 16};
  std::vector<std::size_t> mrn_channels{16, 64, 128};
  std::vector<std::size_t> mrn_dense{256, 64, 16, 2};

  // 64x80 input; hourglass depth 1 so that the 8x10 bottleneck can be halved.
  static NetworkSpec desk_scale();
  // Default ladders at the given input size, with the deepest hourglass (up
  // to the default 3) the size can be halved for. Throws ConstructionError
  // when not even depth 1 fits.
  static NetworkSpec for_input(std::size_t height, std::size_t width);

  // Throw ConstructionError describing the first violated constraint.
  void validate_mln() const;
  void validate_mrn() const;

  std::size_t mrn_flatten_size() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Predicted singular point in model-input pixel coordinates.
struct Detection {
  float x = 0.0f;
  float y = 0.0f;
};

namespace detail {

struct ConvParams {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

// Resolves parameter indices to tape variables, optionally routing gradients
// back into the store.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const ParameterStore& store, ParameterStore* grads)
      : tape_(tape), store_(store), grads_(grads) {}
  Tape& tape() const { return tape_; }
  Tape::Var operator()(std::size_t index) const;

 private:
  Tape& tape_;
  const ParameterStore& store_;
  ParameterStore* grads_;
};

}  // namespace detail

// Shape-preserving recursive hourglass. At every level the input feeds a skip
// branch (conv3x3 + relu) and, after a 2x2 max-pool, the next level down; the
// lower result is upsampled (nearest, 2x) and added to the skip branch. The
// innermost level is a single conv3x3 + relu.
class Hourglass {
 public:
  Hourglass(ParameterStore& store, const std::string& prefix, std::size_t channels,
            std::size_t depth, Rng& rng);

  Tape::Var forward(const detail::ParamBinder& bind, Tape::Var x) const;
  std::size_t depth() const noexcept { return skips_.size(); }

 private:
  Tape::Var level(const detail::ParamBinder& bind, Tape::Var x, std::size_t l) const;

  std::vector<detail::ConvParams> skips_;
  detail::ConvParams bottom_;
};

// A single hourglass with its own parameters, for testing the block in
// isolation.
class HourglassNetwork {
 public:
  HourglassNetwork(std::size_t channels, std::size_t depth, std::uint64_t seed);
  Tensor forward(const Tensor& x) const;
  const ParameterStore& parameters() const noexcept { return store_; }

 private:
  ParameterStore store_;
  Hourglass hourglass_;
};

HourglassNetwork build_hourglass(std::size_t channels, std::size_t depth, std::uint64_t seed);

// Macro-localization network: encoder, stacked hourglass bottleneck, decoder
// with merge connections, 1x1 head and sigmoid.
class Mln {
 public:
  Mln(const NetworkSpec& spec, std::uint64_t seed);

  struct Vars {
    Tape::Var logits;
    Tape::Var mask;
    Tape::Var bottleneck_entry;
  };

  // Records a forward pass; gradients flow into parameters() on backward.
  Vars forward_train(Tape& tape, Tape::Var image);
  Vars forward(Tape& tape, Tape::Var image) const;

  // image [N, 1, H, W] -> mask [N, 1, H, W] in (0, 1).
  Tensor predict(const Tensor& image) const;

  const NetworkSpec& spec() const noexcept { return spec_; }
  ParameterStore& parameters() noexcept { return store_; }
  const ParameterStore& parameters() const noexcept { return store_; }

 private:
  Vars forward_impl(const detail::ParamBinder& bind, Tape::Var image) const;

  NetworkSpec spec_;
  ParameterStore store_;
  std::vector<std::pair<detail::ConvParams, detail::ConvParams>> encoder_;
  bool has_projection_ = false;
  detail::ConvParams projection_;
  std::vector<Hourglass> hourglasses_;
  struct DecoderStage {
    detail::ConvParams up;
    detail::ConvParams conv1;
    detail::ConvParams conv2;
  };
  std::vector<DecoderStage> decoder_;
  detail::ConvParams head_;
};

// Micro-regression network: image and mask in, normalized (x/W, y/H) out.
class Mrn {
 public:
  Mrn(const NetworkSpec& spec, std::uint64_t seed);

  struct Vars {
    Tape::Var coords;
    Tape::Var flattened;
  };

  Vars forward_train(Tape& tape, Tape::Var input);
  Vars forward(Tape& tape, Tape::Var input) const;

  // input [N, 2, H, W] -> [N, 2] normalized coordinates.
  Tensor predict(const Tensor& input) const;

  const NetworkSpec& spec() const noexcept { return spec_; }
  ParameterStore& parameters() noexcept { return store_; }
  const ParameterStore& parameters() const noexcept { return store_; }

 private:
  Vars forward_impl(const detail::ParamBinder& bind, Tape::Var input) const;

  NetworkSpec spec_;
  ParameterStore store_;
  std::vector<detail::ConvParams> blocks_;
  std::vector<detail::ConvParams> dense_;
};

Mln build_mln(const NetworkSpec& spec, std::uint64_t seed);
Mrn build_mrn(const NetworkSpec& spec, std::uint64_t seed);

// Normalized MRN output to clamped input-space pixels.
Detection to_pixels(float nx, float ny, std::size_t height, std::size_t width);

struct SpNetOutput {
  Tensor mask;
  Detection detection;
};

// mask = MLN(image); detection = pixels(MRN(image ++ mask)). image [1, 1, H, W].
SpNetOutput forward_spnet(const Mln& mln, const Mrn& mrn, const Tensor& image);

// The two trained networks joined for inference. Holds references; parameters
// are never modified.
class SpNet {
 public:
  static SpNet stack(const Mln& mln, const Mrn& mrn);

  SpNetOutput detect(const Tensor& image) const { return forward_spnet(*mln_, *mrn_, image); }
  const Mln& mln() const noexcept { return *mln_; }
  const Mrn& mrn() const noexcept { return *mrn_; }

 private:
  SpNet(const Mln& mln, const Mrn& mrn) : mln_(&mln), mrn_(&mrn) {}
  const Mln* mln_;
  const Mrn* mrn_;
};

}  // namespace spnet

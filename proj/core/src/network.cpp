#include "spnet/network.hpp"

#include <algorithm>
#include <cmath>

#include "spnet/error.hpp"

namespace spnet {

NetworkSpec NetworkSpec::desk_scale() { return for_input(64, 80); }

NetworkSpec NetworkSpec::for_input(std::size_t height, std::size_t width) {
  NetworkSpec s;
  s.input_height = height;
  s.input_width = width;
  const std::size_t max_depth = s.hourglass_depth;
  for (std::size_t d = max_depth; d >= 1; --d) {
    const std::size_t f = std::size_t{1} << (s.encoder_channels.size() + d);
    if (height % f == 0 && width % f == 0) {
      s.hourglass_depth = d;
      break;
    }
  }
  s.validate_mln();
  s.validate_mrn();
  return s;
}

namespace {

void require_positive(const std::vector<std::size_t>& ladder, const char* what) {
  if (ladder.empty()) throw ConstructionError(std::string(what) + " must not be empty");
  for (std::size_t c : ladder) {
    if (c == 0) throw ConstructionError(std::string(what) + " contains a zero width");
  }
}

void require_divisible(std::size_t h, std::size_t w, std::size_t levels, const char* why) {
  const std::size_t f = std::size_t{1} << levels;
  if (h == 0 || w == 0 || h % f != 0 || w % f != 0) {
    throw ConstructionError("input " + std::to_string(h) + "x" + std::to_string(w) +
                            " is not divisible by " + std::to_string(f) + " (" + why + ")");
  }
}

}  // namespace

void NetworkSpec::validate_mln() const {
  require_positive(encoder_channels, "encoder channel ladder");
  require_positive(decoder_channels, "decoder channel ladder");
  if (decoder_channels.size() != encoder_channels.size()) {
    throw ConstructionError("decoder ladder must have one stage per encoder block");
  }
  if (hourglass_count == 0) throw ConstructionError("hourglass count must be at least 1");
  if (hourglass_depth == 0) throw ConstructionError("hourglass depth must be at least 1");
  if (hourglass_channels == 0) throw ConstructionError("hourglass channels must be positive");
  require_divisible(input_height, input_width, encoder_channels.size(), "encoder pooling");
  require_divisible(input_height, input_width, encoder_channels.size() + hourglass_depth,
                    "encoder plus hourglass pooling");
}

void NetworkSpec::validate_mrn() const {
  require_positive(mrn_channels, "MRN channel ladder");
  require_positive(mrn_dense, "MRN dense widths");
  if (mrn_dense.back() != 2) throw ConstructionError("last MRN dense width must be 2");
  require_divisible(input_height, input_width, mrn_channels.size(), "MRN pooling");
}

std::size_t NetworkSpec::mrn_flatten_size() const {
  const std::size_t f = std::size_t{1} << mrn_channels.size();
  return mrn_channels.back() * (input_height / f) * (input_width / f);
}

namespace detail {

Tape::Var ParamBinder::operator()(std::size_t index) const {
  const auto& e = store_.entry(index);
  return tape_.parameter(e.value, grads_ ? &grads_->entry(index).grad : nullptr);
}

}  // namespace detail

namespace {

using detail::ConvParams;
using detail::ParamBinder;

// Uniform in +-sqrt(6 / fan_in); biases start at zero.
Tensor init_uniform(const Shape& shape, std::size_t fan_in, Rng& rng) {
  Tensor t(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

ConvParams add_conv(ParameterStore& store, const std::string& name, std::size_t in,
                    std::size_t out, std::size_t k, Rng& rng) {
  ConvParams p;
  p.weight = store.add(name + ".weight", init_uniform({out, in, k, k}, in * k * k, rng));
  p.bias = store.add(name + ".bias", Shape{out});
  return p;
}

ConvParams add_transposed_conv(ParameterStore& store, const std::string& name, std::size_t in,
                               std::size_t out, Rng& rng) {
  ConvParams p;
  p.weight = store.add(name + ".weight", init_uniform({in, out, 3, 3}, in * 9, rng));
  p.bias = store.add(name + ".bias", Shape{out});
  return p;
}

ConvParams add_dense(ParameterStore& store, const std::string& name, std::size_t in,
                     std::size_t out, Rng& rng) {
  ConvParams p;
  p.weight = store.add(name + ".weight", init_uniform({in, out}, in, rng));
  p.bias = store.add(name + ".bias", Shape{out});
  return p;
}

Tape::Var conv_relu(const ParamBinder& bind, Tape::Var x, const ConvParams& p) {
  Tape& t = bind.tape();
  return t.relu(t.conv2d(x, bind(p.weight), bind(p.bias)));
}

}  // namespace

Hourglass::Hourglass(ParameterStore& store, const std::string& prefix, std::size_t channels,
                     std::size_t depth, Rng& rng) {
  if (depth == 0) throw ConstructionError("hourglass depth must be at least 1");
  if (channels == 0) throw ConstructionError("hourglass channels must be positive");
  for (std::size_t l = 0; l < depth; ++l) {
    skips_.push_back(
        add_conv(store, prefix + ".level" + std::to_string(l) + ".skip", channels, channels, 3, rng));
  }
  bottom_ = add_conv(store, prefix + ".bottom", channels, channels, 3, rng);
}

Tape::Var Hourglass::level(const ParamBinder& bind, Tape::Var x, std::size_t l) const {
  Tape& t = bind.tape();
  const Tape::Var skip = conv_relu(bind, x, skips_[l]);
  const Tape::Var down = t.maxpool2d(x);
  const Tape::Var inner =
      (l + 1 == skips_.size()) ? conv_relu(bind, down, bottom_) : level(bind, down, l + 1);
  return t.add(skip, t.upsample_nearest2x(inner));
}

Tape::Var Hourglass::forward(const ParamBinder& bind, Tape::Var x) const {
  return level(bind, x, 0);
}

namespace {

Hourglass make_hourglass(ParameterStore& store, std::size_t channels, std::size_t depth,
                         std::uint64_t seed) {
  Rng rng(seed);
  return Hourglass(store, "hourglass", channels, depth, rng);
}

}  // namespace

HourglassNetwork::HourglassNetwork(std::size_t channels, std::size_t depth, std::uint64_t seed)
    : hourglass_(make_hourglass(store_, channels, depth, seed)) {}

Tensor HourglassNetwork::forward(const Tensor& x) const {
  Tape tape(false);
  const ParamBinder bind(tape, store_, nullptr);
  return tape.value(hourglass_.forward(bind, tape.input(x)));
}

HourglassNetwork build_hourglass(std::size_t channels, std::size_t depth, std::uint64_t seed) {
  return HourglassNetwork(channels, depth, seed);
}

Mln::Mln(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate_mln();
  Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < spec_.encoder_channels.size(); ++i) {
    const std::size_t c = spec_.encoder_channels[i];
    const std::string name = "mln.encoder.block" + std::to_string(i);
    auto c1 = add_conv(store_, name + ".conv1", in, c, 3, rng);
    auto c2 = add_conv(store_, name + ".conv2", c, c, 3, rng);
    encoder_.emplace_back(c1, c2);
    in = c;
  }
  if (in != spec_.hourglass_channels) {
    has_projection_ = true;
    projection_ = add_conv(store_, "mln.bottleneck.proj", in, spec_.hourglass_channels, 3, rng);
    in = spec_.hourglass_channels;
  }
  for (std::size_t k = 0; k < spec_.hourglass_count; ++k) {
    hourglasses_.emplace_back(store_, "mln.hourglass" + std::to_string(k),
                              spec_.hourglass_channels, spec_.hourglass_depth, rng);
  }
  const std::size_t depth = spec_.encoder_channels.size();
  for (std::size_t s = 0; s < depth; ++s) {
    const std::size_t c = spec_.decoder_channels[s];
    const std::size_t skip_channels = spec_.encoder_channels[depth - 1 - s];
    const std::string name = "mln.decoder.stage" + std::to_string(s);
    DecoderStage stage;
    stage.up = add_transposed_conv(store_, name + ".up", in, c, rng);
    stage.conv1 = add_conv(store_, name + ".conv1", c + skip_channels, c, 3, rng);
    stage.conv2 = add_conv(store_, name + ".conv2", c, c, 3, rng);
    decoder_.push_back(stage);
    in = c;
  }
  head_ = add_conv(store_, "mln.head", in, 1, 1, rng);
}

Mln::Vars Mln::forward_impl(const ParamBinder& bind, Tape::Var image) const {
  Tape& t = bind.tape();
  const Tensor& x0 = t.value(image);
  if (x0.rank() != 4 || x0.dim(1) != 1 || x0.dim(2) != spec_.input_height ||
      x0.dim(3) != spec_.input_width) {
    throw InvalidShapeError("MLN expects [N, 1, " + std::to_string(spec_.input_height) + ", " +
                            std::to_string(spec_.input_width) + "] input, got " +
                            shape_to_string(x0.shape()));
  }
  std::vector<Tape::Var> skips;
  Tape::Var x = image;
  for (const auto& [c1, c2] : encoder_) {
    x = conv_relu(bind, conv_relu(bind, x, c1), c2);
    skips.push_back(x);
    x = t.maxpool2d(x);
  }
  if (has_projection_) x = conv_relu(bind, x, projection_);
  const Tape::Var entry = x;
  for (const auto& hg : hourglasses_) x = hg.forward(bind, x);
  for (std::size_t s = 0; s < decoder_.size(); ++s) {
    const DecoderStage& stage = decoder_[s];
    x = t.transposed_conv2d(x, bind(stage.up.weight), bind(stage.up.bias));
    x = t.concat_channels(x, skips[skips.size() - 1 - s]);
    x = conv_relu(bind, conv_relu(bind, x, stage.conv1), stage.conv2);
  }
  const Tape::Var logits = t.conv2d(x, bind(head_.weight), bind(head_.bias));
  return {logits, t.sigmoid(logits), entry};
}

Mln::Vars Mln::forward_train(Tape& tape, Tape::Var image) {
  return forward_impl(ParamBinder(tape, store_, &store_), image);
}

Mln::Vars Mln::forward(Tape& tape, Tape::Var image) const {
  return forward_impl(ParamBinder(tape, store_, nullptr), image);
}

Tensor Mln::predict(const Tensor& image) const {
  Tape tape(false);
  return tape.value(forward(tape, tape.input(image)).mask);
}

Mrn::Mrn(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate_mrn();
  Rng rng(seed);
  std::size_t in = 2;
  for (std::size_t i = 0; i < spec_.mrn_channels.size(); ++i) {
    blocks_.push_back(add_conv(store_, "mrn.block" + std::to_string(i) + ".conv", in,
                               spec_.mrn_channels[i], 3, rng));
    in = spec_.mrn_channels[i];
  }
  in = spec_.mrn_flatten_size();
  for (std::size_t j = 0; j < spec_.mrn_dense.size(); ++j) {
    dense_.push_back(add_dense(store_, "mrn.dense" + std::to_string(j), in, spec_.mrn_dense[j], rng));
    in = spec_.mrn_dense[j];
  }
}

Mrn::Vars Mrn::forward_impl(const ParamBinder& bind, Tape::Var input) const {
  Tape& t = bind.tape();
  const Tensor& x0 = t.value(input);
  if (x0.rank() != 4 || x0.dim(1) != 2 || x0.dim(2) != spec_.input_height ||
      x0.dim(3) != spec_.input_width) {
    throw InvalidShapeError("MRN expects [N, 2, " + std::to_string(spec_.input_height) + ", " +
                            std::to_string(spec_.input_width) + "] input, got " +
                            shape_to_string(x0.shape()));
  }
  Tape::Var x = input;
  for (const auto& b : blocks_) x = t.maxpool2d(conv_relu(bind, x, b));
  const Tape::Var flat = t.flatten(x);
  x = flat;
  for (std::size_t j = 0; j < dense_.size(); ++j) {
    x = t.dense(x, bind(dense_[j].weight), bind(dense_[j].bias));
    if (j + 1 < dense_.size()) x = t.relu(x);
  }
  return {x, flat};
}

Mrn::Vars Mrn::forward_train(Tape& tape, Tape::Var input) {
  return forward_impl(ParamBinder(tape, store_, &store_), input);
}

Mrn::Vars Mrn::forward(Tape& tape, Tape::Var input) const {
  return forward_impl(ParamBinder(tape, store_, nullptr), input);
}

Tensor Mrn::predict(const Tensor& input) const {
  Tape tape(false);
  return tape.value(forward(tape, tape.input(input)).coords);
}

Mln build_mln(const NetworkSpec& spec, std::uint64_t seed) { return Mln(spec, seed); }
Mrn build_mrn(const NetworkSpec& spec, std::uint64_t seed) { return Mrn(spec, seed); }

Detection to_pixels(float nx, float ny, std::size_t height, std::size_t width) {
  const float w = static_cast<float>(width);
  const float h = static_cast<float>(height);
  float x = nx * w;
  float y = ny * h;
  if (!std::isfinite(x)) x = 0.0f;
  if (!std::isfinite(y)) y = 0.0f;
  return {std::clamp(x, 0.0f, w - 1.0f), std::clamp(y, 0.0f, h - 1.0f)};
}

SpNetOutput forward_spnet(const Mln& mln, const Mrn& mrn, const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1) {
    throw InvalidShapeError("forward_spnet expects a single [1, 1, H, W] image, got " +
                            shape_to_string(image.shape()));
  }
  Tape tape(false);
  const Tape::Var x = tape.input(image);
  const Tape::Var mask = mln.forward(tape, x).mask;
  const Tape::Var coords = mrn.forward(tape, tape.concat_channels(x, mask)).coords;
  const Tensor& c = tape.value(coords);
  return {tape.value(mask), to_pixels(c[0], c[1], image.dim(2), image.dim(3))};
}

SpNet SpNet::stack(const Mln& mln, const Mrn& mrn) {
  const NetworkSpec& a = mln.spec();
  const NetworkSpec& b = mrn.spec();
  if (a.input_height != b.input_height || a.input_width != b.input_width) {
    throw SpecMismatchError("cannot stack MLN for " + std::to_string(a.input_height) + "x" +
                            std::to_string(a.input_width) + " with MRN for " +
                            std::to_string(b.input_height) + "x" + std::to_string(b.input_width));
  }
  return SpNet(mln, mrn);
}

}  // namespace spnet

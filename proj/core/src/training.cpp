#include "spnet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spnet/error.hpp"
#include "spnet/ops.hpp"
#include "spnet/random.hpp"

namespace spnet::training {

namespace {

using data::Sample;

// Prepared input for one sample at network resolution.
struct Prepared {
  Tensor image;  // [1, 1, H, W]
  data::Point point;
};

std::vector<Prepared> prepare(const std::vector<Sample>& samples, std::size_t h, std::size_t w,
                              const char* what) {
  std::vector<Prepared> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    if (!s.annotation) {
      throw UnannotatedSampleError(std::string(what) + ": sample " + s.id +
                                   " has no singular-point annotation");
    }
    if (s.height() == h && s.width() == w) {
      out.push_back({s.image, *s.input_annotation()});
    } else {
      const Sample r = data::resize_sample(s, h, w);
      out.push_back({r.image, *r.input_annotation()});
    }
  }
  return out;
}

// Stacks images [1, C, H, W] along N.
Tensor batch_of(const std::vector<const Tensor*>& parts) {
  Shape shape = parts.front()->shape();
  const std::size_t per = parts.front()->size();
  shape[0] = parts.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i]->data().begin(), parts[i]->data().end(), out.data().begin() + i * per);
  }
  return out;
}

template <typename StepFn>
TrainLog run_epochs(int phase, std::size_t n, const TrainConfig& config,
                    const EpochCallback& on_epoch, StepFn&& step) {
  TrainLog log;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng = Rng::derive(config.seed, (static_cast<std::uint64_t>(phase) << 32) | epoch);
    const std::vector<std::size_t> order = permutation(n, rng);
    double weighted = 0.0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::size_t end = std::min(n, b + config.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const double loss = step(idx);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "phase " << phase << " epoch " << epoch + 1 << " batch " << b / config.batch_size
            << ": loss is " << loss;
        throw NonFiniteLossError(msg.str());
      }
      weighted += loss * static_cast<double>(idx.size());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EpochRecord rec{epoch, phase, weighted / static_cast<double>(n), seconds};
    log.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return log;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw InvalidParamsError("split fraction must lie in (0, 1)");
  }
  if (batch_size == 0) throw InvalidParamsError("batch size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidParamsError("learning rate must be positive");
  }
  if (input_height == 0 || input_width == 0) throw InvalidParamsError("input size must be positive");
}

AdamHyperParams TrainConfig::adam() const {
  AdamHyperParams hp;
  hp.learning_rate = learning_rate;
  return hp;
}

Tensor make_gt_mask(data::Point coord, std::size_t height, std::size_t width,
                    std::size_t half_width) {
  if (!(coord.x >= 0.0 && coord.y >= 0.0 && coord.x < static_cast<double>(width) &&
        coord.y < static_cast<double>(height))) {
    std::ostringstream msg;
    msg << "annotation (" << coord.x << ", " << coord.y << ") outside " << height << "x" << width
        << " image";
    throw InvalidAnnotationError(msg.str());
  }
  const auto cx = std::min<long>(std::lround(coord.x), static_cast<long>(width) - 1);
  const auto cy = std::min<long>(std::lround(coord.y), static_cast<long>(height) - 1);
  const long hw = static_cast<long>(half_width);
  const long x0 = std::max(0L, cx - hw);
  const long x1 = std::min(static_cast<long>(width) - 1, cx + hw);
  const long y0 = std::max(0L, cy - hw);
  const long y1 = std::min(static_cast<long>(height) - 1, cy + hw);
  Tensor mask({1, 1, height, width});
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) mask[static_cast<std::size_t>(y) * width + x] = 1.0f;
  }
  return mask;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(std::vector<Sample> samples,
                                                                  double fraction,
                                                                  std::uint64_t seed) {
  if (samples.size() < 2) {
    throw TooFewSamplesError("split_dataset needs at least 2 samples, got " +
                             std::to_string(samples.size()));
  }
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidParamsError("split fraction must lie in (0, 1)");
  }
  const std::size_t n = samples.size();
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Rng rng(seed);
  const auto order = permutation(n, rng);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.first : out.second).push_back(std::move(samples[order[i]]));
  }
  return out;
}

TrainLog train_phase1(Mln& mln, const std::vector<Sample>& train_set, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  const NetworkSpec& spec = mln.spec();
  const std::size_t h = spec.input_height;
  const std::size_t w = spec.input_width;
  const auto data = prepare(train_set, h, w, "train_phase1");
  if (config.epochs > 0 && data.empty()) throw TooFewSamplesError("train_phase1: empty training set");
  std::vector<Tensor> masks;
  for (const auto& p : data) masks.push_back(make_gt_mask(p.point, h, w, config.mask_half_width));

  const AdamHyperParams hp = config.adam();
  ParameterStore& params = mln.parameters();
  return run_epochs(1, data.size(), config, on_epoch, [&](const std::vector<std::size_t>& idx) {
    std::vector<const Tensor*> images, targets;
    for (std::size_t i : idx) {
      images.push_back(&data[i].image);
      targets.push_back(&masks[i]);
    }
    const Tensor gt = batch_of(targets);
    params.zero_grad();
    Tape tape;
    const Mln::Vars v = mln.forward_train(tape, tape.input(batch_of(images)));
    const Tensor& probs = tape.value(v.mask);
    const double loss = ops::bce_loss(probs, gt).value;
    if (!std::isfinite(loss)) return loss;
    // Backpropagate from the logits: (sigmoid - gt) / count does not vanish
    // where the sigmoid saturates.
    tape.backward(v.logits, ops::bce_logit_grad(probs, gt));
    params.adam_step(hp);
    return loss;
  });
}

TrainLog train_phase2(Mrn& mrn, const std::vector<Sample>& train_set, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  const NetworkSpec& spec = mrn.spec();
  const std::size_t h = spec.input_height;
  const std::size_t w = spec.input_width;
  const auto data = prepare(train_set, h, w, "train_phase2");
  if (config.epochs > 0 && data.empty()) throw TooFewSamplesError("train_phase2: empty training set");
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  for (const auto& p : data) {
    inputs.push_back(ops::concat_channels(p.image,
                                          make_gt_mask(p.point, h, w, config.mask_half_width)));
    targets.push_back(Tensor({1, 2}, {static_cast<float>(p.point.x / static_cast<double>(w)),
                                      static_cast<float>(p.point.y / static_cast<double>(h))}));
  }

  const AdamHyperParams hp = config.adam();
  ParameterStore& params = mrn.parameters();
  return run_epochs(2, data.size(), config, on_epoch, [&](const std::vector<std::size_t>& idx) {
    std::vector<const Tensor*> xs, ts;
    for (std::size_t i : idx) {
      xs.push_back(&inputs[i]);
      ts.push_back(&targets[i]);
    }
    const Tensor gt = batch_of(ts);
    params.zero_grad();
    Tape tape;
    const Mrn::Vars v = mrn.forward_train(tape, tape.input(batch_of(xs)));
    auto loss = ops::mse_loss(tape.value(v.coords), gt);
    if (!std::isfinite(loss.value)) return static_cast<double>(loss.value);
    tape.backward(v.coords, std::move(loss.grad));
    params.adam_step(hp);
    return static_cast<double>(loss.value);
  });
}

std::string format_train_log(const TrainLog& log) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,phase,mean_loss,seconds\n";
  for (const auto& e : log.epochs) {
    out << e.epoch + 1 << ',' << e.phase << ',' << e.mean_loss << ',' << e.seconds << '\n';
  }
  return out.str();
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_train_log(log);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spnet::training

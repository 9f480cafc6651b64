// Acceptance checks, one PASS/FAIL line each. With no arguments every check
// runs; otherwise only the named ones. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spnet/checkpoint.hpp"
#include "spnet/error.hpp"
#include "spnet/eval.hpp"
#include "spnet/grad_check.hpp"
#include "spnet/network.hpp"
#include "spnet/ops.hpp"
#include "spnet/poincare.hpp"
#include "spnet/random.hpp"
#include "spnet/synth.hpp"
#include "spnet/training.hpp"
#include "test_data.hpp"

namespace {

using spnet::NetworkSpec;
using spnet::Tensor;
using spnet::data::Point;
using spnet::data::Sample;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a sub-check; the first failure message is kept up front.
  void check(bool ok, const std::string& what) {
    if (!ok) {
      detail << (pass ? "" : "; ") << "failed: " << what;
      pass = false;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- gradients -------------------------------------------------------------

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  double worst32 = 0.0, worst64 = 0.0;
  for (spnet::GradOp op : spnet::kAllGradOps) {
    const auto shapes = spnet::default_grad_shapes(op);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const double e32 = spnet::grad_check(op, shapes, seed, spnet::Precision::Float32);
      const double e64 = spnet::grad_check(op, shapes, seed, spnet::Precision::Float64);
      worst32 = std::max(worst32, e32);
      worst64 = std::max(worst64, e64);
      if (e32 >= 1e-2 || e64 >= 1e-5) {
        o.check(false, std::string(spnet::grad_op_name(op)) + " seed " + std::to_string(seed));
      }
    }
  }
  const double secs = seconds_since(t0);
  o.check(secs < 120.0, "runtime under 2 min");
  o.detail << (o.pass ? "" : "; ") << std::size(spnet::kAllGradOps)
           << " ops x 20 seeds, worst float32 " << worst32 << ", float64 " << worst64 << ", "
           << secs << " s";
}

// ---- shapes ----------------------------------------------------------------

void shape_suite(Outcome& o) {
  const NetworkSpec spec;
  const auto mln = spnet::build_mln(spec, 0);
  const auto mrn = spnet::build_mrn(spec, 1);
  const Tensor image = testing_support::random_tensor({1, 1, 256, 320}, 2, 0.0, 1.0);
  spnet::Tape tape(false);
  const auto v = mln.forward(tape, tape.input(image));
  const Tensor& mask = tape.value(v.mask);
  o.check(mask.shape() == spnet::Shape{1, 1, 256, 320}, "mask is 1x1x256x320");
  bool open_interval = true;
  for (float p : mask.data()) open_interval &= p > 0.0f && p < 1.0f;
  o.check(open_interval, "mask values in (0, 1)");
  o.check(tape.value(v.bottleneck_entry).shape() == spnet::Shape{1, 128, 32, 40},
          "bottleneck entry is 1x128x32x40");
  const auto m = mrn.forward(tape, tape.input(spnet::ops::concat_channels(image, mask)));
  o.check(tape.value(m.flattened).shape() == spnet::Shape{1, 163840}, "MRN flatten 163840");
  o.check(tape.value(m.coords).shape() == spnet::Shape{1, 2}, "MRN output 1x2");

  const NetworkSpec desk = NetworkSpec::desk_scale();
  const auto small = spnet::build_mrn(desk, 3);
  spnet::Tape t2(false);
  const auto s = small.forward(t2, t2.input(Tensor({1, 2, 64, 80})));
  o.check(t2.value(s.flattened).shape() == spnet::Shape{1, 10240}, "64x80 flatten 10240");
  o.check(spec.mrn_flatten_size() == 163840 && desk.mrn_flatten_size() == 10240,
          "spec flatten sizes");
  o.detail << (o.pass ? "" : "; ") << "mask 1x1x256x320, bottleneck 1x128x32x40, flatten 163840 / "
           << "10240";
}

// ---- losses ----------------------------------------------------------------

void loss_oracles(Outcome& o) {
  Tensor gt({16, 20});
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = i % 3 == 0 ? 1.0f : 0.0f;
  const double half = spnet::ops::bce_loss(Tensor({16, 20}, 0.5f), gt).value;
  o.check(std::abs(half - std::log(2.0)) <= 1e-6, "bce of 0.5-map is ln 2");

  const std::vector<double> p{0.9, 0.1, 0.2, 0.8}, g{1, 0, 0, 1};
  const double oracle_value = oracle::bce(p, g);
  const double worked = spnet::ops::bce_loss(Tensor({2, 2}, std::vector<float>{0.9f, 0.1f, 0.2f, 0.8f}),
                                             Tensor({2, 2}, std::vector<float>{1, 0, 0, 1}))
                            .value;
  o.check(std::abs(oracle_value - 0.16425) <= 1e-5, "per-pixel oracle gives 0.16425");
  o.check(std::abs(worked - oracle_value) <= 1e-5, "bce_loss matches per-pixel oracle");

  // Pixel-space check of the coordinate pipeline: prediction and target at
  // 3-4-5 offsets in a 64x64 input, normalized by the side, loss rescaled by
  // the side squared.
  constexpr float side = 64.0f;
  const Tensor pred({1, 2}, std::vector<float>{(20.0f + 3.0f) / side, (30.0f + 4.0f) / side});
  const Tensor target({1, 2}, std::vector<float>{20.0f / side, 30.0f / side});
  const float rescaled = spnet::ops::mse_loss(pred, target).value * side * side;
  o.check(rescaled == 25.0f, "mse 3-4-5 rescales to exactly 25");
  o.detail << (o.pass ? "" : "; ") << "ln2 err " << std::abs(half - std::log(2.0))
           << ", 2x2 example " << worked << ", 3-4-5 -> " << rescaled;
}

// ---- true detection rate ---------------------------------------------------

void tdr_oracle(Outcome& o) {
  o.check(spnet::eval::is_true_detection({112, 116}, {100, 100}), "distance 20 counts");
  spnet::Rng rng(2024);
  std::vector<spnet::eval::PredictionPair> pairs(1000);
  for (auto& pr : pairs) {
    pr.gt = {rng.uniform(0, 320), rng.uniform(0, 256)};
    pr.pred = {pr.gt.x + rng.uniform(-35, 35), pr.gt.y + rng.uniform(-35, 35)};
  }
  // Integer-offset pairs exercise the boundary exactly.
  for (std::size_t i = 0; i < 100; ++i) {
    pairs[i].gt = {100, 100};
    pairs[i].pred = {100.0 + (i % 2 ? 12 : 16), 100.0 + (i % 2 ? 16 : 12)};
  }
  std::size_t hits = 0;
  for (const auto& pr : pairs) {
    const double dx = pr.pred.x - pr.gt.x, dy = pr.pred.y - pr.gt.y;
    if (dx * dx + dy * dy <= 400.0) ++hits;
  }
  const double expected = static_cast<double>(hits) / 1000.0;
  const double got = spnet::eval::tdr(pairs);
  o.check(got == expected, "tdr equals recount");
  o.detail << (o.pass ? "" : "; ") << "recount " << hits << "/1000, tdr " << got;
}

// ---- training experiments ----------------------------------------------------

double mean_error_with_gt_masks(const spnet::Mrn& mrn, const std::vector<Sample>& samples,
                                std::size_t half_width) {
  double total = 0.0;
  for (const auto& s : samples) {
    const Point p = *s.input_annotation();
    const Tensor mask = spnet::training::make_gt_mask(p, s.height(), s.width(), half_width);
    const Tensor out = mrn.predict(spnet::ops::concat_channels(s.image, mask));
    const auto d = spnet::to_pixels(out[0], out[1], s.height(), s.width());
    total += std::hypot(d.x - p.x, d.y - p.y);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<spnet::eval::PredictionPair> stacked_pairs(const spnet::SpNet& net,
                                                       const std::vector<Sample>& samples) {
  std::vector<spnet::eval::PredictionPair> pairs;
  for (const auto& s : samples) {
    const auto out = net.detect(s.image);
    pairs.push_back({{out.detection.x, out.detection.y}, *s.input_annotation()});
  }
  return pairs;
}

void overfit(Outcome& o) {
  const auto t0 = Clock::now();
  spnet::data::CorpusParams cp;
  cp.count = 8;
  cp.seed = 1;
  const auto samples = spnet::data::synth_corpus(cp);

  const NetworkSpec spec = NetworkSpec::desk_scale();
  spnet::training::TrainConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 80;
  cfg.epochs = 500;
  cfg.seed = 1;
  auto mln = spnet::build_mln(spec, 1);
  auto mrn = spnet::build_mrn(spec, 2);

  const auto log1 = spnet::training::train_phase1(
      mln, samples, cfg, [](const auto& r) { return r.mean_loss >= 0.05; });
  o.check(log1.final_loss() < 0.05, "phase 1 BCE < 0.05 within 500 epochs");

  // Phase 2 runs until the regression is comfortably inside the bound.
  double error = 0.0;
  const auto log2 = spnet::training::train_phase2(mrn, samples, cfg, [&](const auto& r) {
    if ((r.epoch + 1) % 10 != 0) return true;
    error = mean_error_with_gt_masks(mrn, samples, cfg.mask_half_width);
    return error >= 2.5;
  });
  error = mean_error_with_gt_masks(mrn, samples, cfg.mask_half_width);
  o.check(error < 5.0, "phase 2 mean error < 5 px");

  const auto pairs = stacked_pairs(spnet::SpNet::stack(mln, mrn), samples);
  const double rate = spnet::eval::tdr(pairs);
  double worst = 0.0;
  for (const auto& pr : pairs) worst = std::max(worst, spnet::eval::distance(pr.pred, pr.gt));
  o.check(rate == 1.0, "stacked TDR@20 = 100%");
  const double secs = seconds_since(t0);
  o.check(secs < 600.0, "runtime under 10 min");
  o.detail << (o.pass ? "" : "; ") << "phase 1 " << log1.epochs.size() << " epochs BCE "
           << log1.final_loss() << ", phase 2 " << log2.epochs.size() << " epochs mean error "
           << error << " px, stacked TDR@20 " << rate << " (worst " << worst << " px), " << secs
           << " s";
}

void generalization(Outcome& o) {
  const auto t0 = Clock::now();
  spnet::data::CorpusParams cp;
  cp.count = 40;
  cp.noise_sigma = 0.05;
  cp.seed = 11;
  const auto all = spnet::data::synth_corpus(cp);
  const std::vector<Sample> train(all.begin(), all.begin() + 32);
  const std::vector<Sample> test(all.begin() + 32, all.end());

  const NetworkSpec spec = NetworkSpec::desk_scale();
  spnet::training::TrainConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 80;
  cfg.seed = 3;
  auto mln = spnet::build_mln(spec, 7);
  auto mrn = spnet::build_mrn(spec, 8);
  cfg.epochs = 80;
  const auto log1 = spnet::training::train_phase1(mln, train, cfg);
  cfg.epochs = 80;
  const auto log2 = spnet::training::train_phase2(mrn, train, cfg);

  const auto pairs = stacked_pairs(spnet::SpNet::stack(mln, mrn), test);
  const double rate = spnet::eval::tdr(pairs);
  double mean = 0.0;
  for (const auto& pr : pairs) mean += spnet::eval::distance(pr.pred, pr.gt) / pairs.size();
  o.check(rate >= 0.75, "held-out TDR@20 >= 75%");
  const double secs = seconds_since(t0);
  o.check(secs < 1200.0, "runtime under 20 min");
  o.detail << (o.pass ? "" : "; ") << "32 train / 8 test, BCE " << log1.final_loss() << ", MSE "
           << log2.final_loss() << ", held-out TDR@20 " << rate << ", mean distance " << mean
           << " px, " << secs << " s";
}

// ---- Poincare baseline -------------------------------------------------------

void baseline(Outcome& o) {
  using namespace spnet::baseline;
  spnet::data::CorpusParams cp;
  cp.count = 100;
  cp.noise_sigma = 0.05;
  cp.margin = 16;
  cp.seed = 21;
  std::size_t within = 0;
  for (const auto& s : spnet::data::synth_corpus(cp)) {
    for (const auto& d : detect_singularities(s.image)) {
      if (d.kind == SingularityClass::Delta) continue;
      within += std::hypot(d.x - s.annotation->x, d.y - s.annotation->y) <= 10.0;
      break;
    }
  }
  o.check(within >= 95, "at least 95/100 within 10 px");

  OrientationField uniform(5, 5, 8);
  for (double& t : uniform.theta) t = 1.1;
  const double flat = poincare_index(uniform, 2, 2);
  o.check(flat == 0.0, "uniform field index exactly 0");

  OrientationField tangent(5, 5, 8);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double phi = std::atan2(static_cast<double>(i) - 2.0, static_cast<double>(j) - 2.0);
      tangent.at(i, j) = std::fmod(phi + std::numbers::pi * 1.5, std::numbers::pi);
    }
  }
  const double whorl = poincare_index(tangent, 2, 2);
  o.check(std::abs(whorl - 2 * std::numbers::pi) <= 1e-3, "tangent field index 2 pi");
  o.detail << (o.pass ? "" : "; ") << within << "/100 within 10 px, uniform index " << flat
           << ", tangent index " << whorl;
}

// ---- determinism and persistence -------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string train_and_save(const std::filesystem::path& path) {
  spnet::data::CorpusParams cp;
  cp.count = 4;
  cp.seed = 5;
  const auto samples = spnet::data::synth_corpus(cp);
  const NetworkSpec spec = NetworkSpec::desk_scale();
  spnet::training::TrainConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 80;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  cfg.seed = 9;
  auto mln = spnet::build_mln(spec, 4);
  auto mrn = spnet::build_mrn(spec, 5);
  spnet::training::train_phase1(mln, samples, cfg);
  spnet::training::train_phase2(mrn, samples, cfg);
  const spnet::ParameterStore* stores[] = {&mln.parameters(), &mrn.parameters()};
  spnet::save_checkpoint(stores, path, true);
  return slurp(path);
}

template <typename E>
bool throws(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
  }
  return false;
}

void determinism(Outcome& o) {
  testing_support::TempDir dir;
  const std::string a = train_and_save(dir / "a.ckpt");
  const std::string b = train_and_save(dir / "b.ckpt");
  o.check(!a.empty() && a == b, "identical seeded runs give identical checkpoint bytes");

  const auto loaded = spnet::load_checkpoint(dir / "a.ckpt");
  spnet::save_checkpoint(loaded, dir / "c.ckpt", true);
  o.check(slurp(dir / "c.ckpt") == a, "load then save reproduces the file");
  const auto reference = spnet::build_mln(NetworkSpec::desk_scale(), 4);
  auto copy = spnet::build_mln(NetworkSpec::desk_scale(), 77);
  spnet::save_checkpoint(reference.parameters(), dir / "m.ckpt");
  copy.parameters().load_from(spnet::load_checkpoint(dir / "m.ckpt"));
  bool exact = true;
  for (std::size_t i = 0; i < copy.parameters().size(); ++i) {
    const auto& x = copy.parameters().entry(i).value.data();
    const auto& y = reference.parameters().entry(i).value.data();
    exact &= x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
  }
  o.check(exact, "round trip is bit-exact");

  auto write = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(dir / name, std::ios::binary) << bytes;
    return dir / name;
  };
  std::string magic = a;
  magic[0] = 'Z';
  std::string version = a;
  version[4] = 7;
  const auto p_magic = write("magic.ckpt", magic);
  const auto p_version = write("version.ckpt", version);
  const auto p_trunc = write("trunc.ckpt", a.substr(0, a.size() / 3));
  o.check(throws<spnet::CorruptMagicError>([&] { spnet::load_checkpoint(p_magic); }),
          "bad magic raises CorruptMagicError");
  o.check(throws<spnet::VersionMismatchError>([&] { spnet::load_checkpoint(p_version); }),
          "bad version raises VersionMismatchError");
  o.check(throws<spnet::TruncatedFileError>([&] { spnet::load_checkpoint(p_trunc); }),
          "truncation raises TruncatedFileError");
  o.detail << (o.pass ? "" : "; ") << "checkpoint " << a.size()
           << " bytes identical across runs; round trip exact; corrupt files rejected";
}

// ---- mask ----------------------------------------------------------------------

void mask_oracle(Outcome& o) {
  spnet::Rng rng(99);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const long h = 64 + static_cast<long>(rng.below(200));
    const long w = 64 + static_cast<long>(rng.below(260));
    const long hw = 21;
    const Point p{rng.uniform(0.0, static_cast<double>(w)), rng.uniform(0.0, static_cast<double>(h))};
    const long cx = std::min(static_cast<long>(std::floor(p.x + 0.5)), w - 1);
    const long cy = std::min(static_cast<long>(std::floor(p.y + 0.5)), h - 1);
    const std::size_t ones = oracle::count_ones(spnet::training::make_gt_mask(p, h, w, hw));
    const long formula = (std::min(cx + hw, w - 1) - std::max(cx - hw, 0L) + 1) *
                         (std::min(cy + hw, h - 1) - std::max(cy - hw, 0L) + 1);
    if (ones != oracle::square_pixels(cx, cy, hw, w, h) || ones != static_cast<std::size_t>(formula)) {
      ++mismatches;
    }
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " mismatching coordinates");
  o.detail << (o.pass ? "" : "; ") << "1000 random coordinates, " << mismatches << " mismatches";
}

struct Criterion {
  const char* name;
  std::function<void(Outcome&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"gradient_suite", gradient_suite}, {"shape_suite", shape_suite},
      {"loss_oracles", loss_oracles},     {"tdr_oracle", tdr_oracle},
      {"overfit", overfit},               {"generalization", generalization},
      {"baseline", baseline},             {"determinism_persistence", determinism},
      {"mask_oracle", mask_oracle},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.size() == 1 && wanted[0] == "--list") {
    for (const auto& c : criteria()) std::cout << c.name << "\n";
    return 0;
  }
  int failures = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
    ++ran;
    Outcome o;
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail.str() << std::endl;
    failures += o.pass ? 0 : 1;
  }
  if (ran != (wanted.empty() ? criteria().size() : wanted.size())) {
    std::cerr << "unknown criterion name\n";
    return 1;
  }
  return failures;
}

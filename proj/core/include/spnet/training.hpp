#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spnet/adam.hpp"
#include "spnet/dataset.hpp"
#include "spnet/network.hpp"

namespace spnet::training {

struct TrainConfig {
  double learning_rate = 0.0005;
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  std::size_t input_height = 256;
  std::size_t input_width = 320;
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t mask_half_width = 21;  // 43x43 square

  // Throws InvalidParamsError.
  void validate() const;
  AdamHyperParams adam() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  int phase = 1;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool empty() const noexcept { return epochs.empty(); }
  double final_loss() const { return epochs.back().mean_loss; }
};

// Called after every epoch; returning false stops training after that epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

// Binary [1, 1, H, W] mask: 1 where max(|x - cx|, |y - cy|) <= half_width,
// with (cx, cy) the coordinate rounded to the nearest pixel. Throws
// InvalidAnnotationError when the coordinate lies outside the image.
Tensor make_gt_mask(data::Point coord, std::size_t height, std::size_t width,
                    std::size_t half_width);

// Seeded shuffle, then the first round(fraction * n) samples (at least one on
// each side) go to training. Throws TooFewSamplesError below two samples.
std::pair<std::vector<data::Sample>, std::vector<data::Sample>> split_dataset(
    std::vector<data::Sample> samples, double fraction, std::uint64_t seed);

// Both phases resize samples to the network input size when needed and
// throw UnannotatedSampleError before the first step if any sample lacks a
// point, NonFiniteLossError as soon as a batch loss is not finite.
//
// Phase 1: pixel-wise BCE of the MLN mask against make_gt_mask targets.
TrainLog train_phase1(Mln& mln, const std::vector<data::Sample>& train_set,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});
// Phase 2: MSE of MRN(image ++ ground-truth mask) against (x / W, y / H).
TrainLog train_phase2(Mrn& mrn, const std::vector<data::Sample>& train_set,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

inline SpNet stack(const Mln& mln, const Mrn& mrn) { return SpNet::stack(mln, mrn); }

// "epoch,phase,mean_loss,seconds", one row per epoch, epochs 1-based.
std::string format_train_log(const TrainLog& log);
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

}  // namespace spnet::training

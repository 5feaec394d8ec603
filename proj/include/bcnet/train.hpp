#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcnet/head.hpp"
#include "bcnet/losses.hpp"
#include "bcnet/synth.hpp"

namespace bcnet {

struct TrainConfig {
  int iterations = 3000;
  int batch = 16;
  double lr = 0.01;
  double momentum = 0.9;
  int warmup_iters = 1000;
  double warmup_factor = 1.0 / 3.0;
  std::uint64_t seed = 0;
  LossWeights weights;
  HeadVariant variant;
  int channels = 16;
  int embed_channels = 0;
  int roi_size = 14;
  int boundary_thickness = 1;
  // Crop-scale jitter: each training ROI is scaled by a factor in [1 - j, 1 + j].
  double scale_jitter = 0.1;
  int log_every = 50;
  int checkpoint_every = 500;

  void validate() const;
  HeadConfig head_config() const;
  // Occluder supervision toggles; disabling one zeroes its loss weight.
  void set_occluder_modeling(bool contour, bool mask);
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
// Keys absent from `j` keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Constant warm-up: lr * warmup_factor before warmup_iters, lr afterwards.
double lr_at(const TrainConfig& cfg, int iteration);

// v <- momentum * v + g ; p <- p - lr * v
void sgd_momentum_step(std::span<float> params, std::span<const float> grads, std::span<float> velocity, double lr,
                       double momentum);

struct LossRecord {
  int iteration = 0;
  double total = 0;
  double occluder_boundary = 0;
  double occluder_mask = 0;
  double occludee_boundary = 0;
  double occludee_mask = 0;
  double lr = 0;

  bool operator==(const LossRecord&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  ParameterSet<float> params;
  // Momentum buffers keyed by parameter name; empty until the first step.
  std::vector<std::pair<std::string, std::vector<float>>> velocity;
  int iteration = 0;  // completed iterations
  // Smoothed total loss at the start and end of training, when known.
  std::optional<double> loss_start;
  std::optional<double> loss_end;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

BilayerHead<float> head_from_checkpoint(const Checkpoint& ckpt);

/// Owns the parameters and optimizer state for one training run.
class Trainer {
 public:
  Trainer(TrainConfig config, std::span<const OcclusionSample> data);
  Trainer(const Checkpoint& resume, std::span<const OcclusionSample> data);

  // One balanced batch, one optimizer update. Throws NumericError on a NaN loss.
  LossRecord step();

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }
  const BilayerHead<float>& head() const { return head_; }
  BilayerHead<float>& head() { return head_; }
  Checkpoint checkpoint() const;

 private:
  TrainConfig config_;
  std::span<const OcclusionSample> data_;
  BalancedSampler sampler_;
  BilayerHead<float> head_;
  std::vector<std::vector<float>> velocity_;  // parallel to head_.parameters()
  int iteration_ = 0;
  std::optional<double> last_finite_;
};

struct TrainHooks {
  // Called every log_every iterations with the mean record over that window.
  std::function<void(const LossRecord&)> on_log;
  // Called every checkpoint_every iterations and at the end.
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> trace;  // one record per iteration
};

TrainResult train(const TrainConfig& config, std::span<const OcclusionSample> data, const TrainHooks& hooks = {});
// Continues `trainer` up to its configured iteration count; the trace covers only the new steps.
TrainResult train(Trainer& trainer, const TrainHooks& hooks = {});

// Mean of the last `window` totals ending at `end` (exclusive).
double smoothed_loss(std::span<const LossRecord> trace, std::size_t end, std::size_t window = 200);

}  // namespace bcnet

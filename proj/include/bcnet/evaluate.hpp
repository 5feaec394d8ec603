#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "bcnet/head.hpp"
#include "bcnet/mask.hpp"
#include "bcnet/synth.hpp"

namespace bcnet {

// A sample belongs to the occluded split when its box overlap ratio reaches this value.
inline constexpr double kOccludedSplitRatio = 0.2;

/// One ROI-level prediction: its confidence and the IoU with its own ground truth.
struct RoiPrediction {
  double score = 0;
  double iou = 0;
};

// Area under the precision envelope of the score-ranked list; a prediction is
// a true positive when its IoU reaches `iou_threshold`. `num_ground_truth`
// is the recall denominator.
double average_precision(std::span<const RoiPrediction> preds, double iou_threshold, std::size_t num_ground_truth);

// Mean of average_precision over IoU thresholds 0.50, 0.55, ..., 0.95.
double mean_average_precision(std::span<const RoiPrediction> preds, std::size_t num_ground_truth);

// F-measure of contour pixels, matching within `tolerance` pixels (8-neighborhood steps).
double boundary_f_score(const BinaryMap& predicted, const BinaryMap& truth, int tolerance = 1);

struct SplitMetrics {
  std::size_t count = 0;
  double mask_iou = 0;
  double boundary_f = 0;
  double ap = 0;
  double ap50 = 0;
};

struct EvalReport {
  float threshold = 0.5f;
  SplitMetrics all;
  SplitMetrics occluded;      // overlap_ratio >= 0.2
  SplitMetrics non_occluded;  // overlap_ratio < 0.2
  std::optional<double> loss_start;
  std::optional<double> loss_end;

  nlohmann::json to_json() const;
};

struct SampleScore {
  RoiPrediction roi;
  double boundary_f = 0;
  bool occluded_split = false;
};

SampleScore score_sample(const BilayerHead<float>& head, const OcclusionSample& sample, float threshold);

// Throws UsageError for an empty sample set.
EvalReport evaluate(const BilayerHead<float>& head, std::span<const OcclusionSample> samples, float threshold = 0.5f);

SplitMetrics summarize(std::span<const SampleScore> scores);

}  // namespace bcnet

#include "bcnet/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcnet/errors.hpp"
#include "bcnet/roi.hpp"

namespace bcnet {

double average_precision(std::span<const RoiPrediction> preds, double iou_threshold, std::size_t num_ground_truth) {
  if (num_ground_truth == 0 || preds.empty()) return 0.0;
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::vector<double> precision(order.size()), recall(order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (preds[order[k]].iou >= iou_threshold) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(num_ground_truth);
  }
  // Precision envelope, right to left.
  for (std::size_t k = order.size() - 1; k > 0; --k) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0, prev_recall = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

double mean_average_precision(std::span<const RoiPrediction> preds, std::size_t num_ground_truth) {
  double acc = 0;
  for (int i = 0; i < 10; ++i) acc += average_precision(preds, (50 + 5 * i) / 100.0, num_ground_truth);
  return acc / 10.0;
}

double boundary_f_score(const BinaryMap& predicted, const BinaryMap& truth, int tolerance) {
  const std::size_t np = predicted.count(), nt = truth.count();
  if (np == 0 && nt == 0) return 1.0;
  if (np == 0 || nt == 0) return 0.0;
  BinaryMap near_truth = truth, near_pred = predicted;
  for (int i = 0; i < tolerance; ++i) {
    near_truth = dilate3x3(near_truth);
    near_pred = dilate3x3(near_pred);
  }
  const double precision = static_cast<double>(mask_and(predicted, near_truth).count()) / static_cast<double>(np);
  const double recall = static_cast<double>(mask_and(truth, near_pred).count()) / static_cast<double>(nt);
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

SampleScore score_sample(const BilayerHead<float>& head, const OcclusionSample& sample, float threshold) {
  NoGradGuard no_grad;
  const int size = head.config().crop_size();
  const auto roi = extract_roi(sample, size);
  const auto out = head.forward_image(roi.image, ForwardMode::kInference);
  const auto pred = binarize_logits(out.occludee_mask, threshold);

  SampleScore s;
  s.roi.iou = mask_iou(pred, roi.occludee_modal);
  // Confidence: mean probability over the pixels claimed as foreground.
  double conf = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    if (!pred.bits[i]) continue;
    conf += 1.0 / (1.0 + std::exp(-static_cast<double>(out.occludee_mask[i])));
    ++n;
  }
  s.roi.score = n ? conf / static_cast<double>(n) : 0.0;
  s.boundary_f = boundary_f_score(boundary_from_mask(pred), boundary_from_mask(roi.occludee_modal));
  s.occluded_split = sample.overlap_ratio >= kOccludedSplitRatio;
  return s;
}

SplitMetrics summarize(std::span<const SampleScore> scores) {
  SplitMetrics m;
  m.count = scores.size();
  if (scores.empty()) return m;
  std::vector<RoiPrediction> preds;
  for (const auto& s : scores) {
    m.mask_iou += s.roi.iou;
    m.boundary_f += s.boundary_f;
    preds.push_back(s.roi);
  }
  m.mask_iou /= static_cast<double>(scores.size());
  m.boundary_f /= static_cast<double>(scores.size());
  m.ap = mean_average_precision(preds, preds.size());
  m.ap50 = average_precision(preds, 0.5, preds.size());
  return m;
}

EvalReport evaluate(const BilayerHead<float>& head, std::span<const OcclusionSample> samples, float threshold) {
  if (samples.empty()) throw UsageError("evaluate: empty dataset");
  std::vector<SampleScore> all, occ, clear;
  for (const auto& sample : samples) {
    const auto s = score_sample(head, sample, threshold);
    all.push_back(s);
    (s.occluded_split ? occ : clear).push_back(s);
  }
  EvalReport r;
  r.threshold = threshold;
  r.all = summarize(all);
  r.occluded = summarize(occ);
  r.non_occluded = summarize(clear);
  return r;
}

namespace {

nlohmann::json split_json(const SplitMetrics& m) {
  return {{"count", m.count}, {"mask_iou", m.mask_iou}, {"boundary_f", m.boundary_f}, {"ap", m.ap}, {"ap50", m.ap50}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j = split_json(all);
  j["threshold"] = threshold;
  j["occluded"] = split_json(occluded);
  j["non_occluded"] = split_json(non_occluded);
  if (loss_start || loss_end) {
    j["loss"] = {{"smoothed_start", loss_start.value_or(0.0)}, {"smoothed_end", loss_end.value_or(0.0)}};
  }
  return j;
}

}  // namespace bcnet

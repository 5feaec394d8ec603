#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bcnet/evaluate.hpp"
#include "bcnet/train.hpp"

namespace bcnet {

/// One row of an ablation: architecture plus supervision/guidance toggles.
struct AblationSpec {
  std::string label;
  HeadVariant variant;
  bool occluder_contour = true;  // lambda2 > 0
  bool occluder_mask = true;     // lambda3 > 0
  bool occludee_contour = true;  // lambda4 > 0

  // "<variant>[:opt,...]" with opts no-guidance, no-occluder-contour,
  // no-occluder-mask, no-occluder-modeling, no-occludee-contour.
  static AblationSpec parse(const std::string& text);
  TrainConfig apply(TrainConfig base) const;
};

// {single, bilayer} x {fcn, gcn}
std::vector<AblationSpec> structure_operator_grid();
// Occluder supervision: none, mask, contour, both.
std::vector<AblationSpec> occlusion_modeling_grid();
// Guidance and occludee-contour toggles on the bilayer GCN head.
std::vector<AblationSpec> guidance_grid();

struct AblationRow {
  AblationSpec spec;
  std::uint64_t seed = 0;
  EvalReport report;
  double final_loss = 0;
  double seconds = 0;
};

using AblationProgress = std::function<void(const AblationRow&)>;

// Trains every spec on identical data with the same seed and evaluates each on `test`.
std::vector<AblationRow> run_ablation(const TrainConfig& base, std::span<const AblationSpec> specs,
                                      std::span<const OcclusionSample> train_data,
                                      std::span<const OcclusionSample> test_data,
                                      const AblationProgress& progress = {});

// Fixed-width text table with one line per row.
std::string format_ablation_table(std::span<const AblationRow> rows);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows);

}  // namespace bcnet

#include "bcnet/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "bcnet/errors.hpp"

namespace bcnet {

AblationSpec AblationSpec::parse(const std::string& text) {
  AblationSpec s;
  const auto colon = text.find(':');
  s.variant = HeadVariant::parse(text.substr(0, colon));
  s.label = text;
  if (colon == std::string::npos) return s;
  std::stringstream opts(text.substr(colon + 1));
  std::string opt;
  while (std::getline(opts, opt, ',')) {
    if (opt == "no-guidance") {
      s.variant.guidance = false;
    } else if (opt == "no-occluder-contour") {
      s.occluder_contour = false;
    } else if (opt == "no-occluder-mask") {
      s.occluder_mask = false;
    } else if (opt == "no-occluder-modeling") {
      s.occluder_contour = s.occluder_mask = false;
    } else if (opt == "no-occludee-contour") {
      s.occludee_contour = false;
    } else {
      throw UsageError("unknown ablation option '" + opt + "' in '" + text + "'");
    }
  }
  return s;
}

TrainConfig AblationSpec::apply(TrainConfig base) const {
  base.variant = variant;
  base.set_occluder_modeling(occluder_contour, occluder_mask);
  base.weights.occludee_boundary = occludee_contour ? LossWeights{}.occludee_boundary : 0.0;
  return base;
}

std::vector<AblationSpec> structure_operator_grid() {
  return {AblationSpec::parse("single-fcn"), AblationSpec::parse("single-gcn"), AblationSpec::parse("bilayer-fcn"),
          AblationSpec::parse("bilayer-gcn")};
}

std::vector<AblationSpec> occlusion_modeling_grid() {
  return {AblationSpec::parse("bilayer-gcn:no-occluder-modeling"), AblationSpec::parse("bilayer-gcn:no-occluder-contour"),
          AblationSpec::parse("bilayer-gcn:no-occluder-mask"), AblationSpec::parse("bilayer-gcn")};
}

std::vector<AblationSpec> guidance_grid() {
  return {AblationSpec::parse("bilayer-gcn:no-guidance,no-occludee-contour"),
          AblationSpec::parse("bilayer-gcn:no-guidance"), AblationSpec::parse("bilayer-gcn:no-occludee-contour"),
          AblationSpec::parse("bilayer-gcn")};
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, std::span<const AblationSpec> specs,
                                      std::span<const OcclusionSample> train_data,
                                      std::span<const OcclusionSample> test_data, const AblationProgress& progress) {
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    const auto cfg = spec.apply(base);
    const auto t0 = std::chrono::steady_clock::now();
    auto result = train(cfg, train_data);
    AblationRow row;
    row.spec = spec;
    row.seed = cfg.seed;
    row.report = evaluate(head_from_checkpoint(result.checkpoint), test_data);
    row.report.loss_start = result.checkpoint.loss_start;
    row.report.loss_end = result.checkpoint.loss_end;
    row.final_loss = result.checkpoint.loss_end.value_or(0.0);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) progress(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream os;
  char line[512];
  int label_width = 7;
  for (const auto& r : rows) label_width = std::max(label_width, static_cast<int>(r.spec.label.size()));
  std::snprintf(line, sizeof(line), "%-*s %6s %8s %8s %8s %8s %8s %8s\n", label_width, "variant", "seed", "IoU",
                "IoU-occ", "AP", "AP50", "AP-occ", "loss");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-*s %6llu %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n", label_width,
                  r.spec.label.c_str(), static_cast<unsigned long long>(r.seed), r.report.all.mask_iou,
                  r.report.occluded.mask_iou, r.report.all.ap, r.report.all.ap50, r.report.occluded.ap, r.final_loss);
    os << line;
  }
  return os.str();
}

nlohmann::json ablation_to_json(std::span<const AblationRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"variant", r.spec.label}, {"seed", r.seed}, {"seconds", r.seconds}, {"report", r.report.to_json()}});
  }
  return j;
}

}  // namespace bcnet

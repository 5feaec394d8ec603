#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "bcnet/ablation.hpp"
#include "bcnet/errors.hpp"
#include "bcnet/evaluate.hpp"
#include "bcnet/image_io.hpp"
#include "bcnet/visualize.hpp"

using namespace bcnet;

namespace {

// For every recall level reached, interpolated precision is the best precision
// at any cutoff with at least that recall; AP is the area of that step curve.
double exhaustive_ap(std::vector<RoiPrediction> preds, double thr, std::size_t n_gt) {
  std::stable_sort(preds.begin(), preds.end(), [](auto& a, auto& b) { return a.score > b.score; });
  std::vector<double> prec, rec;
  for (std::size_t cut = 1; cut <= preds.size(); ++cut) {
    std::size_t tp = 0;
    for (std::size_t i = 0; i < cut; ++i) tp += preds[i].iou >= thr;
    prec.push_back(static_cast<double>(tp) / static_cast<double>(cut));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  double ap = 0, last = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec[k] <= last) continue;
    double best = 0;
    for (std::size_t j = 0; j < rec.size(); ++j)
      if (rec[j] >= rec[k]) best = std::max(best, prec[j]);
    ap += (rec[k] - last) * best;
    last = rec[k];
  }
  return ap;
}

}  // namespace

TEST(Ap, FiveSampleToy) {
  const std::vector<RoiPrediction> p{{0.9, 0.8}, {0.8, 0.1}, {0.7, 0.9}, {0.6, 0.6}, {0.5, 0.2}};
  EXPECT_NEAR(average_precision(p, 0.5, 5), 0.5, 1e-12);
  EXPECT_NEAR(average_precision(p, 0.5, 5), exhaustive_ap(p, 0.5, 5), 1e-12);
}

TEST(Ap, MatchesExhaustiveOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RoiPrediction> p(1 + rng.below(12));
    for (auto& r : p) r = {std::round(rng.uniform() * 10) / 10, rng.uniform()};
    for (double thr : {0.5, 0.75, 0.95}) {
      ASSERT_NEAR(average_precision(p, thr, p.size()), exhaustive_ap(p, thr, p.size()), 1e-12);
    }
  }
}

TEST(Ap, PerfectAndEmpty) {
  std::vector<SampleScore> perfect(4, SampleScore{{0.9, 1.0}, 1.0, true});
  const auto m = summarize(perfect);
  EXPECT_EQ(m.mask_iou, 1.0);
  EXPECT_EQ(m.ap, 1.0);
  EXPECT_EQ(m.ap50, 1.0);
  std::vector<SampleScore> empty(4, SampleScore{{0.0, 0.0}, 0.0, true});
  const auto z = summarize(empty);
  EXPECT_EQ(z.mask_iou, 0.0);
  EXPECT_EQ(z.ap, 0.0);
}

TEST(Ap, Ap50BoundsMeanAp) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RoiPrediction> p(20);
    for (auto& r : p) r = {rng.uniform(), rng.uniform()};
    const double ap = mean_average_precision(p, p.size()), ap50 = average_precision(p, 0.5, p.size());
    EXPECT_GE(ap50, ap);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap50, 1.0);
  }
}

TEST(BoundaryF, Tolerance) {
  BinaryMap a(10, 10), b(10, 10), c(10, 10);
  for (int x = 1; x < 9; ++x) {
    a.set(4, x, true);
    b.set(5, x, true);
    c.set(8, x, true);
  }
  EXPECT_EQ(boundary_f_score(a, a), 1.0);
  EXPECT_EQ(boundary_f_score(a, b, 1), 1.0);
  EXPECT_EQ(boundary_f_score(a, b, 0), 0.0);
  EXPECT_EQ(boundary_f_score(a, c, 1), 0.0);
  EXPECT_EQ(boundary_f_score(BinaryMap(3, 3), BinaryMap(3, 3)), 1.0);
}

TEST(Evaluate, EmptyDatasetIsUsageError) {
  HeadConfig c;
  c.channels = 4;
  const auto head = BilayerHead<float>::init(c, 1);
  EXPECT_THROW(evaluate(head, {}), UsageError);
}

TEST(Evaluate, ReportIsBoundedAndSplit) {
  HeadConfig c;
  c.channels = 4;
  const auto head = BilayerHead<float>::init(c, 2);
  const auto data = generate_dataset(SceneConfig{}, 30);
  const auto r = evaluate(head, data);
  EXPECT_EQ(r.all.count, 30u);
  EXPECT_EQ(r.occluded.count + r.non_occluded.count, 30u);
  for (const auto* m : {&r.all, &r.occluded, &r.non_occluded}) {
    for (double v : {m->mask_iou, m->boundary_f, m->ap, m->ap50}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(m->ap50, m->ap);
  }
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("occluded"));
  EXPECT_EQ(j["non_occluded"]["count"], r.non_occluded.count);
}

TEST(Ablation, GridsAndSpecs) {
  EXPECT_EQ(structure_operator_grid().size(), 4u);
  const auto spec = AblationSpec::parse("bilayer-gcn:no-guidance,no-occluder-modeling");
  EXPECT_FALSE(spec.variant.guidance);
  const auto cfg = spec.apply(TrainConfig{});
  EXPECT_EQ(cfg.weights.occluder_boundary, 0.0);
  EXPECT_EQ(cfg.weights.occluder_mask, 0.0);
  EXPECT_EQ(cfg.weights.occludee_mask, 1.0);
  EXPECT_THROW(AblationSpec::parse("bilayer-gcn:sideways"), UsageError);
}

TEST(Ablation, TableHasOneRowPerVariant) {
  const auto data = generate_dataset(SceneConfig{}, 40);
  TrainConfig base;
  base.iterations = 2;
  base.batch = 2;
  base.warmup_iters = 1;
  base.channels = 4;
  base.roi_size = 6;
  const auto grid = structure_operator_grid();
  const auto rows = run_ablation(base, grid, data, std::span(data).first(8));
  ASSERT_EQ(rows.size(), 4u);
  const auto table = format_ablation_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_NE(table.find("single-fcn"), std::string::npos);
  EXPECT_EQ(ablation_to_json(rows).size(), 4u);
}

TEST(Visualize, HeatmapValuesAndPanel) {
  Tensor logits({2, 2, 1}, {0.f, 100.f, -100.f, 1.f});
  const auto g = heatmap(logits);
  EXPECT_EQ(g.pixels[0], 128);  // round(127.5)
  EXPECT_EQ(g.pixels[1], 255);
  EXPECT_EQ(g.pixels[2], 0);
  EXPECT_EQ(g.pixels[3], 186);  // round(255 * 0.7311)

  BilayerOutput<float> out{logits, logits, logits, logits};
  const auto panel = heatmap_panel(Tensor::full({4, 4, 3}, 0.5f), out, 8);
  EXPECT_EQ(panel.height, 8);
  EXPECT_EQ(panel.width, 5 * 8 + 4 * 2);
  EXPECT_FLOAT_EQ(panel.at(0, 0, 0), 0.5f);
  EXPECT_FLOAT_EQ(panel.at(0, 10 + 4, 1), 1.0f);  // tile 1, top-right quadrant: logit 100

  BinaryMap region(2, 2);
  region.set(0, 1, true);
  EXPECT_EQ(region_mean(g, region, true), 255.0);
  EXPECT_NEAR(region_mean(g, region, false), (128 + 0 + 186) / 3.0, 1e-12);
}

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "bcnet/errors.hpp"
#include "bcnet/roi.hpp"
#include "bcnet/synth.hpp"

using namespace bcnet;

namespace {

SceneConfig occluded_config() {
  SceneConfig c;
  c.overlap_lo = 0.2;
  c.overlap_hi = 0.8;
  return c;
}

void expect_layering(const OcclusionSample& s, const SceneConfig& cfg) {
  ASSERT_EQ(s.occludee_modal, mask_minus(s.occludee_amodal, s.occluder_amodal));
  ASSERT_EQ(s.is_occluded, !mask_and(s.occluder_amodal, s.occludee_amodal).empty());
  ASSERT_GE(s.overlap_ratio, cfg.overlap_lo);
  ASSERT_LE(s.overlap_ratio, cfg.overlap_hi);
  ASSERT_EQ(s.occluder_boundary, boundary_from_mask(s.occluder_amodal));
  ASSERT_EQ(s.occludee_boundary, boundary_from_mask(s.occludee_modal));
  ASSERT_EQ(count_components_4(s.occluder_amodal), 1);
  ASSERT_EQ(count_components_4(s.occludee_amodal), 1);
}

}  // namespace

TEST(Overlap, RatioArithmetic) {
  const Box a{0, 0, 10, 10};
  EXPECT_EQ(overlap_ratio(a, a), 1.0);
  EXPECT_EQ(overlap_ratio(a, Box{20, 20, 30, 30}), 0.0);
  EXPECT_DOUBLE_EQ(overlap_ratio(a, Box{5, 0, 15, 10}), 0.5);
  // Intersection over the smaller box: a box nested inside another is fully overlapped.
  EXPECT_DOUBLE_EQ(overlap_ratio(a, Box{2, 2, 4, 4}), 1.0);
  EXPECT_EQ(overlap_ratio(a, Box{3, 3, 3, 9}), 0.0);
}

TEST(Scene, LayeringInvariants) {
  const auto cfg = occluded_config();
  for (std::uint64_t seed = 0; seed < 300; ++seed) expect_layering(generate_scene(cfg, seed), cfg);
  SceneConfig wide;
  for (std::uint64_t seed = 0; seed < 300; ++seed) expect_layering(generate_scene(wide, seed), wide);
}

TEST(Scene, OccludedRangeMeetsSplitRatio) {
  const auto cfg = occluded_config();
  for (std::uint64_t seed = 0; seed < 100; ++seed) EXPECT_GE(generate_scene(cfg, seed).overlap_ratio, 0.2);
}

TEST(Scene, ZeroOverlapLeavesOccludeeWhole) {
  SceneConfig cfg;
  cfg.overlap_lo = cfg.overlap_hi = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = generate_scene(cfg, seed);
    EXPECT_EQ(s.occludee_modal, s.occludee_amodal);
    EXPECT_FALSE(s.is_occluded);
  }
}

TEST(Scene, DeterministicInSeed) {
  const auto cfg = occluded_config();
  const auto a = generate_scene(cfg, 7), b = generate_scene(cfg, 7);
  EXPECT_EQ(a.image.pixels, b.image.pixels);
  EXPECT_EQ(a.occludee_modal, b.occludee_modal);
  EXPECT_EQ(a.roi_box, b.roi_box);
  EXPECT_NE(generate_scene(cfg, 8).image.pixels, a.image.pixels);
}

TEST(Scene, RoiBoxPadsAmodalBox) {
  SceneConfig cfg;
  const auto s = generate_scene(cfg, 3);
  const Box tight = bounding_box(s.occludee_amodal);
  EXPECT_LE(s.roi_box.x0, tight.x0);
  EXPECT_LE(s.roi_box.y0, tight.y0);
  EXPECT_GE(s.roi_box.x1, tight.x1);
  EXPECT_GE(s.roi_box.y1, tight.y1);
}

TEST(Scene, ImpossibleRangeIsGenerationError) {
  SceneConfig cfg;
  cfg.overlap_lo = 0.999;
  cfg.overlap_hi = 0.9995;
  cfg.palette = {ShapeKind::kTriangle};
  EXPECT_THROW(generate_scene(cfg, 1), GenerationError);
}

TEST(Scene, ConfigValidation) {
  SceneConfig cfg;
  cfg.canvas = 16;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = {};
  cfg.overlap_lo = 0.6;
  cfg.overlap_hi = 0.4;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Dataset, ThreadCountDoesNotChangeSamples) {
  const auto cfg = occluded_config();
  const auto a = generate_dataset(cfg, 12, 1), b = generate_dataset(cfg, 12, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(a[i].image.pixels, b[i].image.pixels);
    EXPECT_EQ(a[i].seed, cfg.seed + i);
  }
}

TEST(Balance, EightOfSixteen) {
  const auto pool = generate_dataset(SceneConfig{}, 200);
  BalancedSampler sampler(pool);
  ASSERT_GE(sampler.occluded_count(), 8u);
  ASSERT_GE(sampler.clear_count(), 8u);
  Rng rng(1);
  std::size_t occluded = 0, drawn = 0;
  for (int b = 0; b < 1000; ++b) {
    const auto batch = sampler.draw(16, rng);
    ASSERT_EQ(batch.size(), 16u);
    ASSERT_EQ(std::set<std::size_t>(batch.begin(), batch.end()).size(), 16u);
    const auto n = std::count_if(batch.begin(), batch.end(), [&](std::size_t i) { return pool[i].is_occluded; });
    ASSERT_EQ(n, 8);
    occluded += static_cast<std::size_t>(n);
    drawn += batch.size();
  }
  EXPECT_EQ(2 * occluded, drawn);
}

TEST(Balance, OddBatchRoundsOccludedUp) {
  BalancedSampler sampler({0, 1, 2}, {3, 4, 5});
  Rng rng(2);
  const auto one = sampler.draw(1, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_LT(one[0], 3u);
  const auto five = sampler.draw(5, rng);
  EXPECT_EQ(std::count_if(five.begin(), five.end(), [](std::size_t i) { return i < 3; }), 3);
}

TEST(Balance, DeficitIsSamplingError) {
  BalancedSampler sampler({0, 1}, {2, 3, 4, 5});
  Rng rng(3);
  try {
    sampler.draw(8, rng);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("occluded"), std::string::npos) << e.what();
  }
}

TEST(Roi, CropsAtHeadResolution) {
  const auto s = generate_scene(SceneConfig{}, 4);
  const auto roi = extract_roi(s, 28);
  EXPECT_EQ(roi.image.shape(), (Shape{28, 28, 3}));
  EXPECT_EQ(roi.occludee_modal.height, 28);
  EXPECT_FALSE(roi.occludee_amodal.empty());
  EXPECT_EQ(roi.occludee_modal, mask_minus(roi.occludee_amodal, roi.occluder_mask));
}

TEST(Roi, BoxHelpers) {
  EXPECT_EQ(scale_box(Box{0, 0, 10, 20}, 2.0), (Box{-5, -10, 15, 30}));
  EXPECT_EQ(clip_box(Box{-5, -3, 70, 40}, 64, 32), (Box{0, 0, 64, 32}));
}

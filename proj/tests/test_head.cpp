#include <cmath>

#include <gtest/gtest.h>

#include "bcnet/errors.hpp"
#include "bcnet/head.hpp"
#include "bcnet/losses.hpp"
#include "bcnet/ops.hpp"
#include "support.hpp"

using namespace bcnet;
using namespace bcnet::testing;

namespace {

HeadConfig small_config(const char* variant, int channels = 8, int roi = 6) {
  HeadConfig c;
  c.channels = channels;
  c.roi_size = roi;
  c.variant = HeadVariant::parse(variant);
  return c;
}

template <typename T>
void fill(BasicTensor<T>& t, T v) {
  for (auto& x : t.mutable_data()) x = v;
}

template <typename T>
void expect_bit_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]) << "at " << i;
}

}  // namespace

TEST(Variant, ParseAndName) {
  for (const char* n : {"bilayer-gcn", "bilayer-fcn", "single-gcn", "single-fcn"}) {
    EXPECT_EQ(HeadVariant::parse(n).name(), n);
  }
  EXPECT_THROW(HeadVariant::parse("triple-gcn"), UsageError);
}

TEST(Head, PaperScaleShapes) {
  HeadConfig c;
  c.stem = false;
  const auto head = BilayerHead<float>::init(c, 1);
  Rng rng(1);
  const auto x = random_tensor<float>({14, 14, 256}, rng);
  NoGradGuard g;
  const auto occ = occluder_branch(*head.occluder(), x);
  EXPECT_EQ(occ.feature.shape(), (Shape{14, 14, 256}));
  EXPECT_EQ(occ.boundary.shape(), (Shape{28, 28, 1}));
  EXPECT_EQ(occ.mask.shape(), (Shape{28, 28, 1}));
  const auto out = head.forward(x);
  EXPECT_EQ(out.occludee_mask.shape(), (Shape{28, 28, 1}));
  EXPECT_EQ(out.occludee_boundary.shape(), (Shape{28, 28, 1}));
  ASSERT_TRUE(out.occluder_mask.has_value());
  EXPECT_EQ(out.occluder_boundary->shape(), (Shape{28, 28, 1}));
  EXPECT_EQ(head.parameters().at("occluder.gcn.theta.weight").shape(), (Shape{256, 128}));
}

TEST(Head, StemMapsCropToRoiFeature) {
  const auto head = BilayerHead<float>::init(small_config("bilayer-gcn", 8, 14), 2);
  Rng rng(2);
  const auto feat = head.stem_forward(random_tensor<float>({28, 28, 3}, rng, 0, 1));
  EXPECT_EQ(feat.shape(), (Shape{14, 14, 8}));
  EXPECT_THROW(head.stem_forward(random_tensor<float>({20, 20, 3}, rng)), DimensionError);
}

TEST(Head, ZeroParametersGiveZeroLogits) {
  auto head = BilayerHead<double>::init(small_config("bilayer-gcn"), 3);
  for (auto& [_, t] : head.parameters().entries()) fill(t, 0.0);
  Rng rng(3);
  const auto x = random_tensor({6, 6, 8}, rng);
  const auto occ = occluder_branch(*head.occluder(), x);
  for (double v : occ.boundary.data()) EXPECT_EQ(v, 0.0);
  for (double v : occ.mask.data()) EXPECT_EQ(v, 0.0);
  const auto [b, m] = occludee_branch(head.occludee(), x);
  for (double v : b.data()) EXPECT_EQ(v, 0.0);
  for (double v : m.data()) EXPECT_EQ(v, 0.0);
}

TEST(Fuse, HandCasesAndDenseOracle) {
  Rng rng(4);
  const std::size_t h = 3, w = 4, k = 5;
  FusionParams<double> fp{{random_tensor({1, 1, k, k}, rng), random_tensor({k}, rng)}};
  const auto x = random_tensor({h, w, k}, rng);

  // Zero occluder feature with zero bias passes X_roi through.
  FusionParams<double> nobias{{fp.w_f0.weight, DTensor::zeros({k})}};
  expect_bit_equal(fuse(DTensor::zeros({h, w, k}), x, nobias), x);

  DTensor eye = DTensor::zeros({1, 1, k, k});
  for (std::size_t c = 0; c < k; ++c) eye.mutable_data()[c * k + c] = 1.0;
  const auto z0 = random_tensor({h, w, k}, rng);
  expect_bit_equal(fuse(z0, DTensor::zeros({h, w, k}), FusionParams<double>{{eye, DTensor::zeros({k})}}), z0);

  const auto got = fuse(z0, x, fp);
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t co = 0; co < k; ++co) {
      double want = fp.w_f0.bias[co] + x[p * k + co];
      for (std::size_t ci = 0; ci < k; ++ci) want += z0[p * k + ci] * fp.w_f0.weight[ci * k + co];
      EXPECT_NEAR(got[p * k + co], want, 1e-6);
    }
  EXPECT_THROW(fuse(z0, DTensor::zeros({h, w, k + 1}), fp), DimensionError);
}

TEST(Head, BilayerWithSilentOccluderEqualsSingleLayer) {
  for (const char* op : {"gcn", "fcn"}) {
    const auto single = BilayerHead<float>::init(small_config((std::string("single-") + op).c_str(), 8, 14), 5);
    auto bilayer = BilayerHead<float>::init(small_config((std::string("bilayer-") + op).c_str(), 8, 14), 6);
    for (auto& [name, t] : bilayer.parameters().entries()) {
      if (single.parameters().contains(name)) {
        const auto src = single.parameters().at(name).data();
        std::copy(src.begin(), src.end(), t.mutable_data().begin());
      } else {
        ASSERT_TRUE(name.starts_with("occluder.") || name.starts_with("fusion.")) << name;
        fill(t, 0.0f);
      }
    }
    Rng rng(7);
    const auto crop = random_tensor<float>({28, 28, 3}, rng, 0, 1);
    const auto a = single.forward_image(crop), b = bilayer.forward_image(crop);
    expect_bit_equal(a.occludee_mask, b.occludee_mask);
    expect_bit_equal(a.occludee_boundary, b.occludee_boundary);
    EXPECT_FALSE(a.occluder_mask.has_value());
  }
}

TEST(Head, InferenceAndTrainingAgreeOnOccludee) {
  const auto head = BilayerHead<float>::init(small_config("bilayer-gcn"), 8);
  Rng rng(8);
  const auto x = random_tensor<float>({6, 6, 8}, rng);
  const auto train = head.forward(x, ForwardMode::kTrain);
  const auto infer = head.forward(x, ForwardMode::kInference);
  const auto viz = head.forward(x, ForwardMode::kVisualize);
  expect_bit_equal(train.occludee_mask, infer.occludee_mask);
  expect_bit_equal(train.occludee_boundary, infer.occludee_boundary);
  EXPECT_FALSE(infer.occluder_mask.has_value());
  ASSERT_TRUE(viz.occluder_mask.has_value());
  expect_bit_equal(*train.occluder_mask, *viz.occluder_mask);
}

TEST(Head, DeterministicInitAndForward) {
  const auto a = BilayerHead<float>::init(small_config("bilayer-gcn"), 9);
  const auto b = BilayerHead<float>::init(small_config("bilayer-gcn"), 9);
  Rng r1(9), r2(9);
  const auto x1 = random_tensor<float>({6, 6, 8}, r1), x2 = random_tensor<float>({6, 6, 8}, r2);
  expect_bit_equal(a.forward(x1).occludee_mask, b.forward(x2).occludee_mask);
  expect_bit_equal(a.forward(x1).occludee_mask, a.forward(x1).occludee_mask);
}

TEST(Head, VariantParameterNames) {
  const auto sf = BilayerHead<float>::init(small_config("single-fcn"), 1);
  for (const auto& [name, _] : sf.parameters().entries()) {
    EXPECT_EQ(name.find("gcn"), std::string::npos) << name;
    EXPECT_FALSE(name.starts_with("occluder.")) << name;
  }
  const auto bg = BilayerHead<float>::init(small_config("bilayer-gcn"), 1);
  for (const char* n : {"stem.conv1.weight", "occluder.gcn.theta.weight", "occluder.gcn.w_g", "fusion.w_f0.weight",
                        "occludee.gcn.phi.bias", "occludee.mask_head.weight", "occludee.boundary_head.bias"}) {
    EXPECT_TRUE(bg.parameters().contains(n)) << n;
  }
}

TEST(Head, NoGuidanceFreezesFusionAtZero) {
  auto cfg = small_config("bilayer-gcn");
  cfg.variant.guidance = false;
  const auto head = BilayerHead<float>::init(cfg, 2);
  for (const char* n : {"fusion.w_f0.weight", "fusion.w_f0.bias"}) {
    const auto& t = head.parameters().at(n);
    EXPECT_TRUE(head.is_frozen(n));
    EXPECT_FALSE(t.requires_grad());
    for (float v : t.data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Head, OccludeeLossReachesOccluderBranch) {
  auto head = BilayerHead<double>::init(small_config("bilayer-gcn"), 10);
  Rng rng(10);
  const auto x = random_tensor({6, 6, 8}, rng);
  const auto out = head.forward(x);
  BinaryMap occ(12, 12), ee(12, 12);
  for (int y = 2; y < 8; ++y)
    for (int xx = 2; xx < 8; ++xx) ee.set(y, xx, true);
  for (int y = 5; y < 11; ++y)
    for (int xx = 5; xx < 11; ++xx) occ.set(y, xx, true);
  const auto gt = make_ground_truth<double>(occ, mask_minus(ee, occ));
  occludee_loss(out, gt, LossWeights{}).backward();
  for (const char* n : {"occluder.gcn.theta.weight", "occluder.gcn.phi.weight", "occluder.gcn.w_g"}) {
    double norm = 0;
    for (double g : head.parameters().at(n).grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << n;
  }
  // The occluder heads are leaves of the graph: no occludee-loss gradient.
  const auto& w_b = head.parameters().at("occluder.boundary_head.weight");
  for (double g : w_b.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Head, FusionPathCarriesInputSensitivity) {
  // d(occludee logits)/d(X_roi) must change when the fusion path is silenced.
  auto head = BilayerHead<double>::init(small_config("bilayer-gcn"), 11);
  Rng rng(11);
  auto x = random_tensor({6, 6, 8}, rng, -1, 1, true);
  ops::sum(head.forward(x).occludee_mask).backward();
  const std::vector<double> with(x.grad().begin(), x.grad().end());

  for (auto& [name, t] : head.parameters().entries()) {
    if (name.starts_with("fusion.")) fill(t, 0.0);
  }
  x.zero_grad();
  ops::sum(head.forward(x).occludee_mask).backward();
  double diff = 0;
  for (std::size_t i = 0; i < with.size(); ++i) diff += std::abs(with[i] - x.grad()[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Head, OutputsFiniteOverRandomForwards) {
  const auto head = BilayerHead<float>::init(small_config("bilayer-gcn", 8, 4), 12);
  Rng rng(12);
  NoGradGuard g;
  for (int i = 0; i < 1000; ++i) {
    const auto out = head.forward(random_tensor<float>({4, 4, 8}, rng, -5, 5));
    for (const auto* t : {&out.occludee_mask, &out.occludee_boundary, &*out.occluder_mask, &*out.occluder_boundary}) {
      for (float v : t->data()) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Head, BindRejectsMissingParameter) {
  auto head = BilayerHead<float>::init(small_config("bilayer-gcn"), 13);
  ParameterSet<float> partial;
  for (const auto& [name, t] : head.parameters().entries()) {
    if (name != "occludee.gcn.w_g") partial.add(name, t);
  }
  EXPECT_THROW(BilayerHead<float>::bind(head.config(), partial), UsageError);
}

TEST(Head, FullHeadGradientsMatchCentralDifferences) {
  auto cfg = small_config("bilayer-gcn", 4, 4);
  auto head = BilayerHead<double>::init(cfg, 14);
  Rng rng(14);
  const auto crop = random_tensor({8, 8, 3}, rng, 0, 1);
  BinaryMap occ(8, 8), ee(8, 8);
  for (int y = 1; y < 6; ++y)
    for (int x = 1; x < 6; ++x) ee.set(y, x, true);
  for (int y = 3; y < 8; ++y)
    for (int x = 4; x < 8; ++x) occ.set(y, x, true);
  const auto gt = make_ground_truth<double>(occ, mask_minus(ee, occ));
  std::vector<DTensor> params;
  for (const auto& [_, t] : head.parameters().entries()) params.push_back(t);
  const auto r = grad_check(params, [&] { return total_loss(head.forward_image(crop), gt, LossWeights{}); }, 1e-5, 20,
                            15, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

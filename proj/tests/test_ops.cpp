#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "bcnet/errors.hpp"
#include "bcnet/ops.hpp"
#include "support.hpp"

using namespace bcnet;
using namespace bcnet::testing;

namespace {

std::vector<double> naive_matmul(const DTensor& a, const DTensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * n + j] += a[i * k + p] * b[p * n + j];
  return out;
}

std::vector<double> naive_conv(const DTensor& x, const DTensor& w, const DTensor& b, int stride, int pad) {
  const int h = static_cast<int>(x.dim(0)), wd = static_cast<int>(x.dim(1)), cin = static_cast<int>(x.dim(2));
  const int k = static_cast<int>(w.dim(0)), cout = static_cast<int>(w.dim(3));
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(ho) * wo * cout);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      for (int co = 0; co < cout; ++co) {
        double acc = b[co];
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx)
            for (int ci = 0; ci < cin; ++ci) {
              const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
              if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
              acc += x[(static_cast<std::size_t>(iy) * wd + ix) * cin + ci] *
                     w[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co];
            }
        out[(static_cast<std::size_t>(oy) * wo + ox) * cout + co] = acc;
      }
  return out;
}

void expect_near_all(std::span<const double> got, const std::vector<double>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

}  // namespace

TEST(Matmul, HandCases) {
  const DTensor eye({2, 2}, {1, 0, 0, 1});
  const DTensor m({2, 2}, {1, 2, 3, 4});
  const auto p = ops::matmul(eye, m);
  EXPECT_EQ(std::vector<double>(p.data().begin(), p.data().end()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(ops::matmul(DTensor({1, 2}, {1, 2}), DTensor({2, 1}, {3, 4})).item(), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    expect_near_all(ops::matmul(a, b).data(), naive_matmul(a, b), 1e-6);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    ops::matmul(DTensor::zeros({2, 3}), DTensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Conv2d, IdentityAndDelta) {
  Rng rng(2);
  const auto x = random_tensor({4, 5, 1}, rng);
  const auto id = ops::conv2d(x, DTensor::full({1, 1, 1, 1}, 1.0), DTensor::zeros({1}), 1, 0);
  expect_near_all(id.data(), std::vector<double>(x.data().begin(), x.data().end()), 0.0);

  DTensor delta({3, 3, 1}, std::vector<double>(9, 0.0));
  delta.mutable_data()[4] = 1.0;
  const auto y = ops::conv2d(delta, DTensor::full({3, 3, 1, 1}, 1.0), DTensor::zeros({1}), 1, 1);
  expect_near_all(y.data(), std::vector<double>(9, 1.0), 0.0);
}

TEST(Conv2d, MatchesSixLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_tensor({5, 5, 2}, rng);
    const auto w = random_tensor({3, 3, 2, 3}, rng);
    const auto b = random_tensor({3}, rng);
    expect_near_all(ops::conv2d(x, w, b, 1, 1).data(), naive_conv(x, w, b, 1, 1), 1e-5);
    expect_near_all(ops::conv2d(x, w, b, 2, 1).data(), naive_conv(x, w, b, 2, 1), 1e-5);
  }
}

TEST(Conv2d, ChannelMismatchThrows) {
  EXPECT_THROW(ops::conv2d(DTensor::zeros({3, 3, 2}), DTensor::zeros({3, 3, 3, 1}), DTensor::zeros({1}), 1, 1),
               DimensionError);
}

TEST(LayerNorm, HandCases) {
  const auto z = ops::layer_norm(DTensor::zeros({1, 4}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  const auto y = ops::layer_norm(DTensor({1, 2}, {1, -1}));
  EXPECT_NEAR(y[0], 1 / std::sqrt(1 + 1e-5), 1e-12);
  EXPECT_NEAR(y[1], -1 / std::sqrt(1 + 1e-5), 1e-12);
}

TEST(LayerNorm, RowMomentsOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_tensor({4, 8}, rng, -3, 3);
    const auto y = ops::layer_norm(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double mu = 0, var = 0, xmu = 0, xvar = 0;
      for (std::size_t c = 0; c < 8; ++c) {
        mu += y[r * 8 + c] / 8;
        xmu += x[r * 8 + c] / 8;
      }
      for (std::size_t c = 0; c < 8; ++c) {
        var += (y[r * 8 + c] - mu) * (y[r * 8 + c] - mu) / 8;
        xvar += (x[r * 8 + c] - xmu) * (x[r * 8 + c] - xmu) / 8;
      }
      EXPECT_LT(std::abs(mu), 1e-6);
      // Exact variance after normalization is xvar / (xvar + eps).
      EXPECT_NEAR(var, 1.0, 1e-4);
      for (std::size_t c = 0; c < 8; ++c) {
        EXPECT_NEAR(y[r * 8 + c], (x[r * 8 + c] - xmu) / std::sqrt(xvar + 1e-5), 1e-9);
      }
    }
  }
}

TEST(LayerNorm, ShiftInvariant) {
  Rng rng(5);
  const auto x = random_tensor({3, 6}, rng);
  DTensor shifted = x.detach();
  for (auto& v : shifted.mutable_data()) v += 2.5;
  const auto a = ops::layer_norm(x), b = ops::layer_norm(shifted);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(Softmax, HandCases) {
  EXPECT_DOUBLE_EQ(ops::softmax_rows(DTensor({1, 1}, std::vector<double>{42.0})).item(), 1.0);
  const auto u = ops::softmax_rows(DTensor({1, 2}, {0, 0}));
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  const auto s = ops::softmax_rows(DTensor({1, 2}, {0, 1}));
  EXPECT_NEAR(s[0], 1 / (1 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(s[1], std::exp(1.0) / (1 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(s[0], 0.26894, 1e-5);
}

TEST(Softmax, ScalarOracleAndRowSums) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_tensor({5, 5}, rng, -20, 20);
    const auto y = ops::softmax_rows(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double denom = 0, row = 0;
      for (std::size_t c = 0; c < 5; ++c) denom += std::exp(x[r * 5 + c]);
      for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_NEAR(y[r * 5 + c], std::exp(x[r * 5 + c]) / denom, 1e-9);
        EXPECT_GE(y[r * 5 + c], 0.0);
        EXPECT_LE(y[r * 5 + c], 1.0);
        row += y[r * 5 + c];
      }
      EXPECT_NEAR(row, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  const auto y = ops::softmax_rows(Tensor({1, 3}, {1000.f, 999.f, -1000.f}));
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Softmax, NaNThrows) {
  EXPECT_THROW(ops::softmax_rows(DTensor({1, 2}, {0.0, std::numeric_limits<double>::quiet_NaN()})), NumericError);
}

TEST(Elementwise, HandCases) {
  const auto r = ops::relu(DTensor({2}, {-1, 2}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  EXPECT_DOUBLE_EQ(ops::sigmoid(DTensor::scalar(0.0)).item(), 0.5);
  const auto up = ops::bilinear_upsample2x(DTensor::full({3, 2, 2}, 0.7));
  EXPECT_EQ(up.shape(), (Shape{6, 4, 2}));
  for (double v : up.data()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Upsample, HalfPixelCentres) {
  // 1-D ramp [0, 1]: align_corners=false samples at 0.25 and 0.75 between centres.
  const auto up = ops::bilinear_upsample2x(DTensor({1, 2, 1}, {0, 1}));
  const std::vector<double> want{0, 0.25, 0.75, 1};
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(up[y * 4 + x], want[x], 1e-12);
}

TEST(Flatten, RoundTrip) {
  Rng rng(7);
  const auto x = random_tensor({3, 4, 5}, rng);
  const auto f = ops::flatten_spatial(x);
  EXPECT_EQ(f.shape(), (Shape{12, 5}));
  const auto back = ops::unflatten_spatial(f, 3, 4);
  EXPECT_EQ(back.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back[i], x[i]);
}

TEST(Bce, HandCases) {
  Rng rng(8);
  const auto target = random_tensor({4, 4, 1}, rng, 0, 1);
  EXPECT_NEAR(ops::bce_with_logits(DTensor::zeros({4, 4, 1}), target).item(), std::log(2.0), 1e-12);
  const DTensor z({2}, {100, -100}), t({2}, {1, 0});
  EXPECT_LT(ops::bce_with_logits(z, t).item(), 1e-6);
}

TEST(Bce, ScalarLoopOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto z = random_tensor({4, 4, 1}, rng, -6, 6);
    DTensor t({4, 4, 1});
    for (auto& v : t.mutable_data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    double want = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double p = 1 / (1 + std::exp(-z[i]));
      want -= t[i] * std::log(p) + (1 - t[i]) * std::log(1 - p);
    }
    EXPECT_NEAR(ops::bce_with_logits(z, t).item(), want / 16, 1e-6);
  }
}

// ---- autodiff ----

TEST(Backward, LinearAndQuadratic) {
  DTensor x({2, 2}, {1, 2, 3, 4}, true);
  ops::sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);

  DTensor y({2}, {1, 2}, true);
  ops::sum(ops::mul(y, y)).backward();
  EXPECT_EQ(y.grad()[0], 2.0);
  EXPECT_EQ(y.grad()[1], 4.0);
}

TEST(Backward, AccumulatesUntilZeroed) {
  DTensor x({2}, {1, 2}, true);
  ops::sum(x).backward();
  ops::sum(x).backward();
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  ops::sum(x).backward();
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Backward, NonScalarIsUsageError) {
  DTensor x({2}, {1, 2}, true);
  EXPECT_THROW(ops::scale(x, 2.0).backward(), UsageError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  DTensor x({2}, {1, 2}, true);
  NoGradGuard guard;
  const auto y = ops::sum(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Backward, GraphIsTopologicallyOrdered) {
  DTensor x({2, 2}, {1, 2, 3, 4}, true);
  const auto y = ops::sum(ops::relu(ops::matmul(x, ops::transpose(x))));
  const auto graph = ComputeGraph<double>::trace(y);
  std::vector<const void*> seen;
  for (const auto& n : graph.nodes()) {
    for (const auto& p : n->parents) {
      EXPECT_NE(std::find(seen.begin(), seen.end(), p.get()), seen.end()) << n->op << " before its input";
    }
    seen.push_back(n.get());
  }
  EXPECT_EQ(graph.nodes().back().get(), y.node().get());
}

TEST(Backward, DeterministicReplay) {
  Rng a(11), b(11);
  const auto xa = random_tensor<float>({6, 6}, a, -1, 1, true), xb = random_tensor<float>({6, 6}, b, -1, 1, true);
  const auto la = ops::sum(ops::softmax_rows(ops::matmul(xa, xa)));
  const auto lb = ops::sum(ops::softmax_rows(ops::matmul(xb, xb)));
  la.backward();
  lb.backward();
  EXPECT_EQ(la.item(), lb.item());
  for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(xa.grad()[i], xb.grad()[i]);
}

// Every differentiable op against central differences, 100 random trials each.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const int op = GetParam();
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(1000 * op + trial);
    std::vector<DTensor> in;
    std::function<DTensor()> f;
    switch (op) {
      case 0: {
        in = {random_tensor({3, 4}, rng, -1, 1, true), random_tensor({4, 2}, rng, -1, 1, true)};
        f = [&] { return project(ops::matmul(in[0], in[1]), 1); };
        break;
      }
      case 1: {
        in = {random_tensor({4, 4, 2}, rng, -1, 1, true), random_tensor({3, 3, 2, 3}, rng, -1, 1, true),
              random_tensor({3}, rng, -1, 1, true)};
        const int stride = 1 + trial % 2;
        f = [&, stride] { return project(ops::conv2d(in[0], in[1], in[2], stride, 1), 2); };
        break;
      }
      case 2: {
        in = {random_tensor({3, 6}, rng, -2, 2, true)};
        f = [&] { return project(ops::layer_norm(in[0]), 3); };
        break;
      }
      case 3: {
        in = {random_tensor({4, 5}, rng, -3, 3, true)};
        f = [&] { return project(ops::softmax_rows(in[0]), 4); };
        break;
      }
      case 4: {
        in = {random_tensor({3, 3, 2}, rng, -1, 1, true)};
        f = [&] { return project(ops::bilinear_upsample2x(in[0]), 5); };
        break;
      }
      case 5: {
        in = {random_tensor({3, 4}, rng, -1, 1, true), random_tensor({3, 4}, rng, -1, 1, true)};
        f = [&] { return project(ops::add(ops::mul(in[0], in[1]), ops::scale(in[1], 0.7)), 6); };
        break;
      }
      case 6: {
        in = {random_tensor({5, 3}, rng, -1, 1, true), random_tensor({3}, rng, -1, 1, true)};
        f = [&] { return project(ops::sigmoid(ops::add_bias(in[0], in[1])), 7); };
        break;
      }
      case 7: {
        // Keep inputs away from the kink so differences do not straddle it.
        in = {random_tensor({4, 4}, rng, 0.05, 1, true)};
        for (std::size_t i = 0; i < 16; i += 2) in[0].mutable_data()[i] *= -1;
        f = [&] { return project(ops::relu(in[0]), 8); };
        break;
      }
      case 8: {
        in = {random_tensor({3, 3, 1}, rng, -4, 4, true)};
        DTensor t({3, 3, 1});
        for (auto& v : t.mutable_data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        f = [&, t] { return ops::bce_with_logits(in[0], t); };
        break;
      }
      default: {
        in = {random_tensor({2, 3, 4}, rng, -1, 1, true)};
        f = [&] {
          return ops::mean(ops::transpose(ops::flatten_spatial(ops::unflatten_spatial(ops::flatten_spatial(in[0]), 2, 3))));
        };
        break;
      }
    }
    const auto r = grad_check(in, f, 1e-3);
    ASSERT_LT(r.max_rel_error, 1e-3) << "op " << op << " trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, 10));

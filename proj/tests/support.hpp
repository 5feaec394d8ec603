#pragma once

// Shared helpers for the unit tests: random tensors and a double-precision
// central-difference gradient checker.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bcnet/ops.hpp"
#include "bcnet/random.hpp"
#include "bcnet/tensor.hpp"

namespace bcnet::testing {

using DTensor = BasicTensor<double>;

template <typename T = double>
BasicTensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return BasicTensor<T>(std::move(shape), std::move(v), requires_grad);
}

inline std::size_t index3(std::size_t y, std::size_t x, std::size_t c, std::size_t w, std::size_t ch) {
  return (y * w + x) * ch + c;
}

// Reduces any output to a scalar with fixed random weights so every output
// element contributes a distinct coefficient to the gradient.
inline DTensor project(const DTensor& out, std::uint64_t seed) {
  Rng rng(seed);
  const auto weights = random_tensor(out.shape(), rng);
  return ops::sum(ops::mul(out, weights));
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

// Compares analytic gradients of `loss(inputs)` with central differences on
// up to `samples_per_input` coordinates of each input. The relative error
// uses max(|analytic|, |numeric|, floor) in the denominator.
inline GradCheckResult grad_check(std::vector<DTensor> inputs, const std::function<DTensor()>& loss,
                                  double h = 1e-6, std::size_t samples_per_input = 1000, std::uint64_t seed = 7,
                                  double floor = 1e-4) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }
  NoGradGuard no_grad;
  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    const std::size_t n = data.size();
    const std::size_t count = std::min(n, samples_per_input);
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = count == n ? s : rng.below(n);
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss().item();
      data[i] = saved - h;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace bcnet::testing

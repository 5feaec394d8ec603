#include "bcnet/mask.hpp"

#include <algorithm>
#include <cmath>

#include "bcnet/errors.hpp"

namespace bcnet {

namespace {

void require_same_size(const BinaryMap& a, const BinaryMap& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError("binary maps differ in size: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

template <typename Op>
BinaryMap combine(const BinaryMap& a, const BinaryMap& b, Op op) {
  require_same_size(a, b);
  BinaryMap out(a.height, a.width);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = op(a.bits[i], b.bits[i]) ? 1 : 0;
  return out;
}

}  // namespace

std::size_t BinaryMap::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMap mask_and(const BinaryMap& a, const BinaryMap& b) {
  return combine(a, b, [](auto x, auto y) { return x && y; });
}

BinaryMap mask_or(const BinaryMap& a, const BinaryMap& b) {
  return combine(a, b, [](auto x, auto y) { return x || y; });
}

BinaryMap mask_minus(const BinaryMap& a, const BinaryMap& b) {
  return combine(a, b, [](auto x, auto y) { return x && !y; });
}

BinaryMap erode3x3(const BinaryMap& m) {
  BinaryMap out(m.height, m.width);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool keep = m.at(y, x) != 0;
      for (int dy = -1; dy <= 1 && keep; ++dy)
        for (int dx = -1; dx <= 1 && keep; ++dx) keep = m.at_or_zero(y + dy, x + dx) != 0;
      out.set(y, x, keep);
    }
  }
  return out;
}

BinaryMap dilate3x3(const BinaryMap& m) {
  BinaryMap out(m.height, m.width);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool hit = false;
      for (int dy = -1; dy <= 1 && !hit; ++dy)
        for (int dx = -1; dx <= 1 && !hit; ++dx) hit = m.at_or_zero(y + dy, x + dx) != 0;
      out.set(y, x, hit);
    }
  }
  return out;
}

BinaryMap boundary_from_mask(const BinaryMap& mask, int thickness) {
  if (thickness < 1) throw UsageError("boundary thickness must be >= 1");
  BinaryMap core = mask;
  for (int i = 0; i < thickness; ++i) core = erode3x3(core);
  return mask_minus(mask, core);
}

double mask_iou(const BinaryMap& a, const BinaryMap& b) {
  require_same_size(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Box bounding_box(const BinaryMap& m) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
          static_cast<double>(y1 + 1)};
}

namespace {

// Labels 4-connected components; returns the label count. Labels start at 1.
int label_components(const BinaryMap& m, std::vector<int>& labels) {
  labels.assign(m.bits.size(), 0);
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(m.bits.size()); ++start) {
    if (!m.bits[start] || labels[start]) continue;
    labels[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int y = p / m.width, x = p % m.width;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int i = 0; i < 4; ++i) {
        if (!m.inside(ny[i], nx[i])) continue;
        const int q = ny[i] * m.width + nx[i];
        if (m.bits[q] && !labels[q]) {
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return next;
}

}  // namespace

int count_components_4(const BinaryMap& m) {
  std::vector<int> labels;
  return label_components(m, labels);
}

BinaryMap largest_component_4(const BinaryMap& m) {
  std::vector<int> labels;
  const int n = label_components(m, labels);
  BinaryMap out(m.height, m.width);
  if (n == 0) return out;
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n) + 1, 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  int best = 1;
  for (int l = 2; l <= n; ++l) {
    if (sizes[static_cast<std::size_t>(l)] > sizes[static_cast<std::size_t>(best)]) best = l;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) out.bits[i] = labels[i] == best ? 1 : 0;
  return out;
}

BinaryMap binarize_logits(const Tensor& logits, float threshold) {
  if (logits.rank() != 3 || logits.dim(2) != 1) {
    throw DimensionError("binarize_logits expects [H, W, 1], got " + shape_to_string(logits.shape()));
  }
  if (!(threshold > 0.0f && threshold < 1.0f)) throw UsageError("threshold must lie in (0, 1)");
  BinaryMap out(static_cast<int>(logits.dim(0)), static_cast<int>(logits.dim(1)));
  // sigmoid(z) >= t  <=>  z >= logit(t)
  const double cut = std::log(static_cast<double>(threshold) / (1.0 - threshold));
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = logits[i] >= cut ? 1 : 0;
  return out;
}

template <typename T>
BasicTensor<T> to_tensor(const BinaryMap& m) {
  std::vector<T> v(m.bits.begin(), m.bits.end());
  return BasicTensor<T>({static_cast<std::size_t>(m.height), static_cast<std::size_t>(m.width), 1}, std::move(v));
}

template Tensor to_tensor<float>(const BinaryMap&);
template BasicTensor<double> to_tensor<double>(const BinaryMap&);

}  // namespace bcnet

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bcnet/tensor.hpp"

namespace bcnet {

/// Binary raster, row-major, one byte per pixel holding 0 or 1.
struct BinaryMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMap() = default;
  BinaryMap(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  bool inside(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  // Pixels outside the raster read as background.
  std::uint8_t at_or_zero(int y, int x) const { return inside(y, x) ? at(y, x) : 0; }
  void set(int y, int x, bool on) { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const BinaryMap&) const = default;
};

/// Axis-aligned box with half-open extent [x0, x1) x [y0, y1) in pixel units.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
  bool operator==(const Box&) const = default;
};

BinaryMap mask_and(const BinaryMap& a, const BinaryMap& b);
BinaryMap mask_or(const BinaryMap& a, const BinaryMap& b);
BinaryMap mask_minus(const BinaryMap& a, const BinaryMap& b);

// 3x3 square structuring element; the raster border counts as background.
BinaryMap erode3x3(const BinaryMap& m);
BinaryMap dilate3x3(const BinaryMap& m);

// Inner contour: mask AND NOT erode^thickness(mask).
BinaryMap boundary_from_mask(const BinaryMap& mask, int thickness = 1);

// |a & b| / |a | b|; two empty maps count as a perfect match.
double mask_iou(const BinaryMap& a, const BinaryMap& b);

// Tight box around set pixels; a zero box for an empty map.
Box bounding_box(const BinaryMap& m);

int count_components_4(const BinaryMap& m);

// Largest 4-connected component (ties resolved by scan order).
BinaryMap largest_component_4(const BinaryMap& m);

// [H, W, 1] logits -> sigmoid(z) >= threshold.
BinaryMap binarize_logits(const Tensor& logits, float threshold);

// [H, W, 1] tensor of 0/1 values, no gradient.
template <typename T>
BasicTensor<T> to_tensor(const BinaryMap& m);

}  // namespace bcnet

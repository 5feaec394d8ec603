#include "bcnet/roi.hpp"

#include <algorithm>
#include <cmath>

#include "bcnet/errors.hpp"

namespace bcnet {

Box scale_box(const Box& box, double factor) {
  const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
  const double hw = 0.5 * box.width() * factor, hh = 0.5 * box.height() * factor;
  return {cx - hw, cy - hh, cx + hw, cy + hh};
}

Box clip_box(const Box& box, int width, int height) {
  return {std::clamp(box.x0, 0.0, static_cast<double>(width)), std::clamp(box.y0, 0.0, static_cast<double>(height)),
          std::clamp(box.x1, 0.0, static_cast<double>(width)), std::clamp(box.y1, 0.0, static_cast<double>(height))};
}

namespace {

void check_box(const Box& box, int size) {
  if (!(box.width() > 0 && box.height() > 0)) throw UsageError("ROI box has no area");
  if (size < 1) throw UsageError("crop size must be positive");
}

}  // namespace

Tensor crop_image(const Image& image, const Box& box, int size) {
  check_box(box, size);
  const auto c = static_cast<std::size_t>(image.channels);
  const auto s = static_cast<std::size_t>(size);
  std::vector<float> out(s * s * c, 0.f);
  const double sx = box.width() / size, sy = box.height() / size;
  auto sample = [&](int y, int x, std::size_t ch) -> double {
    if (y < 0 || y >= image.height || x < 0 || x >= image.width) return 0.0;
    return image.at(y, x, static_cast<int>(ch));
  };
  for (int oy = 0; oy < size; ++oy) {
    const double fy = box.y0 + (oy + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    for (int ox = 0; ox < size; ++ox) {
      const double fx = box.x0 + (ox + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = (1 - wy) * ((1 - wx) * sample(y0, x0, ch) + wx * sample(y0, x0 + 1, ch)) +
                         wy * ((1 - wx) * sample(y0 + 1, x0, ch) + wx * sample(y0 + 1, x0 + 1, ch));
        out[(static_cast<std::size_t>(oy) * s + ox) * c + ch] = static_cast<float>(v);
      }
    }
  }
  return Tensor({s, s, c}, std::move(out));
}

BinaryMap crop_mask(const BinaryMap& mask, const Box& box, int size) {
  check_box(box, size);
  BinaryMap out(size, size);
  const double sx = box.width() / size, sy = box.height() / size;
  for (int oy = 0; oy < size; ++oy) {
    const int y = static_cast<int>(std::floor(box.y0 + (oy + 0.5) * sy));
    for (int ox = 0; ox < size; ++ox) {
      const int x = static_cast<int>(std::floor(box.x0 + (ox + 0.5) * sx));
      out.set(oy, ox, mask.at_or_zero(y, x) != 0);
    }
  }
  return out;
}

RoiCrop extract_roi(const OcclusionSample& sample, const Box& box, int size) {
  return {crop_image(sample.image, box, size), crop_mask(sample.occluder_amodal, box, size),
          crop_mask(sample.occludee_modal, box, size), crop_mask(sample.occludee_amodal, box, size)};
}

}  // namespace bcnet

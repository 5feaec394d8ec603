#include "bcnet/visualize.hpp"

#include <cmath>

#include "bcnet/errors.hpp"

namespace bcnet {

GrayImage heatmap(const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(2) != 1) {
    throw DimensionError("heatmap: expected [H, W, 1], got " + shape_to_string(logits.shape()));
  }
  GrayImage g{static_cast<int>(logits.dim(0)), static_cast<int>(logits.dim(1)), {}};
  g.pixels.resize(logits.numel());
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * p));
  }
  return g;
}

GrayImage upscale(const GrayImage& image, int factor) {
  if (factor < 1) throw UsageError("upscale: factor must be >= 1");
  GrayImage out{image.height * factor, image.width * factor, {}};
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.pixels[static_cast<std::size_t>(y) * out.width + x] =
          image.pixels[static_cast<std::size_t>(y / factor) * image.width + x / factor];
  return out;
}

namespace {

constexpr int kGap = 2;

void blit(Image& panel, int slot, int tile, int src_h, int src_w, auto&& sample) {
  const int x0 = slot * (tile + kGap);
  for (int y = 0; y < tile; ++y) {
    const int sy = y * src_h / tile;
    for (int x = 0; x < tile; ++x) {
      const int sx = x * src_w / tile;
      for (int c = 0; c < 3; ++c) panel.at(y, x0 + x, c) = sample(sy, sx, c);
    }
  }
}

}  // namespace

Image heatmap_panel(const Tensor& crop, const BilayerOutput<float>& out, int tile) {
  if (crop.rank() != 3) throw DimensionError("heatmap_panel: crop must be [H, W, C]");
  if (tile < 1) throw UsageError("heatmap_panel: tile must be >= 1");
  Image panel(tile, 5 * tile + 4 * kGap, 3);
  const int ch = static_cast<int>(crop.dim(0)), cw = static_cast<int>(crop.dim(1)), cc = static_cast<int>(crop.dim(2));
  blit(panel, 0, tile, ch, cw, [&](int y, int x, int c) {
    return crop[(static_cast<std::size_t>(y) * cw + x) * cc + (cc == 1 ? 0 : c)];
  });
  const std::optional<Tensor>* maps[] = {&out.occluder_boundary, &out.occluder_mask};
  for (int i = 0; i < 2; ++i) {
    if (!*maps[i]) continue;
    const auto g = heatmap(**maps[i]);
    blit(panel, 1 + i, tile, g.height, g.width,
         [&](int y, int x, int) { return g.pixels[static_cast<std::size_t>(y) * g.width + x] / 255.f; });
  }
  const Tensor* own[] = {&out.occludee_boundary, &out.occludee_mask};
  for (int i = 0; i < 2; ++i) {
    const auto g = heatmap(*own[i]);
    blit(panel, 3 + i, tile, g.height, g.width,
         [&](int y, int x, int) { return g.pixels[static_cast<std::size_t>(y) * g.width + x] / 255.f; });
  }
  return panel;
}

double region_mean(const GrayImage& heat, const BinaryMap& region, bool inside) {
  if (heat.height != region.height || heat.width != region.width) {
    throw DimensionError("region_mean: heatmap and region sizes differ");
  }
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < heat.pixels.size(); ++i) {
    if (static_cast<bool>(region.bits[i]) != inside) continue;
    acc += heat.pixels[i];
    ++n;
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace bcnet

#pragma once

#include "bcnet/head.hpp"
#include "bcnet/image_io.hpp"
#include "bcnet/mask.hpp"

namespace bcnet {

// [H, W, 1] logits -> round(255 * sigmoid(z)).
GrayImage heatmap(const Tensor& logits);

// Nearest-neighbor upscale by an integer factor.
GrayImage upscale(const GrayImage& image, int factor);

// Input crop followed by occluder boundary, occluder mask, occludee boundary
// and occludee mask heatmaps, left to right. Missing occluder maps are drawn black.
// Tiles are `tile` pixels square and separated by a 2-pixel gap.
Image heatmap_panel(const Tensor& crop, const BilayerOutput<float>& out, int tile = 112);

// Mean heat value over pixels where `region` is set (inside) or clear (outside).
double region_mean(const GrayImage& heat, const BinaryMap& region, bool inside);

}  // namespace bcnet

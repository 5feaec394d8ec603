#pragma once

#include "bcnet/head.hpp"
#include "bcnet/mask.hpp"

namespace bcnet {

struct MaskPrediction {
  bool has_occluder = false;
  BinaryMap occluder_boundary;
  BinaryMap occluder_mask;
  BinaryMap occludee_boundary;
  BinaryMap occludee_mask;
  // Pixels claimed as contour by both layers: contour caused by overlap
  // rather than by the occludee's own shape.
  BinaryMap occlusion_boundary;
};

// Binarizes sigmoid(logits) at `threshold`. `tolerance` > 0 dilates the
// occluder boundary that many times before intersecting (0 = plain AND).
MaskPrediction predict_mask(const BilayerOutput<float>& out, float threshold = 0.5f, int tolerance = 0);

}  // namespace bcnet

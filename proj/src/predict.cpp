#include "bcnet/predict.hpp"

#include "bcnet/errors.hpp"

namespace bcnet {

MaskPrediction predict_mask(const BilayerOutput<float>& out, float threshold, int tolerance) {
  if (tolerance < 0) throw UsageError("predict_mask: tolerance must be >= 0");
  MaskPrediction p;
  p.occludee_boundary = binarize_logits(out.occludee_boundary, threshold);
  p.occludee_mask = binarize_logits(out.occludee_mask, threshold);
  if (out.occluder_boundary && out.occluder_mask) {
    p.has_occluder = true;
    p.occluder_boundary = binarize_logits(*out.occluder_boundary, threshold);
    p.occluder_mask = binarize_logits(*out.occluder_mask, threshold);
    BinaryMap reach = p.occluder_boundary;
    for (int i = 0; i < tolerance; ++i) reach = dilate3x3(reach);
    p.occlusion_boundary = mask_and(reach, p.occludee_boundary);
  } else {
    p.occlusion_boundary = BinaryMap(p.occludee_boundary.height, p.occludee_boundary.width);
  }
  return p;
}

}  // namespace bcnet

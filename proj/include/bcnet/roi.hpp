#pragma once

#include "bcnet/image_io.hpp"
#include "bcnet/mask.hpp"
#include "bcnet/synth.hpp"
#include "bcnet/tensor.hpp"

namespace bcnet {

/// Fixed-size crop around an ROI box: the stem input plus targets at head
/// output resolution (both size x size).
struct RoiCrop {
  Tensor image;  // [size, size, channels]
  BinaryMap occluder_mask;
  BinaryMap occludee_modal;
  BinaryMap occludee_amodal;
};

// Scales a box about its center.
Box scale_box(const Box& box, double factor);

// Clips a box to the [0, width) x [0, height) canvas.
Box clip_box(const Box& box, int width, int height);

// Bilinear resampling with half-pixel centers; pixels outside the image read as 0.
Tensor crop_image(const Image& image, const Box& box, int size);

// Nearest-neighbor resampling of a binary raster.
BinaryMap crop_mask(const BinaryMap& mask, const Box& box, int size);

RoiCrop extract_roi(const OcclusionSample& sample, const Box& box, int size);
inline RoiCrop extract_roi(const OcclusionSample& sample, int size) { return extract_roi(sample, sample.roi_box, size); }

}  // namespace bcnet

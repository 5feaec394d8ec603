#pragma once

#include "bcnet/head.hpp"
#include "bcnet/mask.hpp"
#include "bcnet/tensor.hpp"

namespace bcnet {

/// Multi-task loss weights. `detect` weights the detection term, which this
/// project does not model; it is carried for completeness and multiplies nothing.
struct LossWeights {
  double detect = 1.0;
  double occluder_boundary = 0.5;
  double occluder_mask = 0.25;
  double occludee_boundary = 0.5;
  double occludee_mask = 1.0;

  void validate() const;
  LossWeights scaled(double c) const;
};

/// Binary targets at head output resolution, each [2H, 2W, 1].
template <typename T>
struct GroundTruthMaps {
  BasicTensor<T> occluder_boundary;
  BasicTensor<T> occluder_mask;
  BasicTensor<T> occludee_boundary;
  BasicTensor<T> occludee_mask;
};

// Boundaries are derived from the masks with the given contour thickness.
template <typename T>
GroundTruthMaps<T> make_ground_truth(const BinaryMap& occluder_mask, const BinaryMap& occludee_mask,
                                     int boundary_thickness = 1);

// Mean-reduced binary cross-entropy on logits.
template <typename T>
BasicTensor<T> bce_map_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target);

/// Per-map BCE values and their weighted combinations (all scalar tensors).
template <typename T>
struct LossTerms {
  BasicTensor<T> occluder_boundary;
  BasicTensor<T> occluder_mask;
  BasicTensor<T> occludee_boundary;
  BasicTensor<T> occludee_mask;
  BasicTensor<T> occluder;  // lambda2 * occluder_boundary + lambda3 * occluder_mask
  BasicTensor<T> occludee;  // lambda4 * occludee_boundary + lambda5 * occludee_mask
  BasicTensor<T> total;     // occluder + occludee
};

// Weighted sums of already computed component losses.
template <typename T>
LossTerms<T> combine_losses(const BasicTensor<T>& occluder_boundary, const BasicTensor<T>& occluder_mask,
                            const BasicTensor<T>& occludee_boundary, const BasicTensor<T>& occludee_mask,
                            const LossWeights& w);

// Single-layer heads have no occluder maps; their occluder components are 0.
template <typename T>
LossTerms<T> compute_losses(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w);

template <typename T>
BasicTensor<T> occluder_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w);

template <typename T>
BasicTensor<T> occludee_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w);

template <typename T>
BasicTensor<T> total_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w);

}  // namespace bcnet

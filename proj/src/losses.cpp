#include "bcnet/losses.hpp"

#include <cmath>

#include "bcnet/errors.hpp"
#include "bcnet/ops.hpp"

namespace bcnet {

void LossWeights::validate() const {
  for (double v : {detect, occluder_boundary, occluder_mask, occludee_boundary, occludee_mask}) {
    if (!std::isfinite(v) || v < 0) throw UsageError("loss weights must be finite and non-negative");
  }
}

LossWeights LossWeights::scaled(double c) const {
  return {detect * c, occluder_boundary * c, occluder_mask * c, occludee_boundary * c, occludee_mask * c};
}

template <typename T>
GroundTruthMaps<T> make_ground_truth(const BinaryMap& occluder_mask, const BinaryMap& occludee_mask,
                                     int boundary_thickness) {
  return {to_tensor<T>(boundary_from_mask(occluder_mask, boundary_thickness)), to_tensor<T>(occluder_mask),
          to_tensor<T>(boundary_from_mask(occludee_mask, boundary_thickness)), to_tensor<T>(occludee_mask)};
}

template <typename T>
BasicTensor<T> bce_map_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  return ops::bce_with_logits(logits, target);
}

template <typename T>
LossTerms<T> combine_losses(const BasicTensor<T>& occluder_boundary, const BasicTensor<T>& occluder_mask,
                            const BasicTensor<T>& occludee_boundary, const BasicTensor<T>& occludee_mask,
                            const LossWeights& w) {
  w.validate();
  LossTerms<T> t{occluder_boundary, occluder_mask, occludee_boundary, occludee_mask, {}, {}, {}};
  t.occluder = ops::add(ops::scale(occluder_boundary, static_cast<T>(w.occluder_boundary)),
                        ops::scale(occluder_mask, static_cast<T>(w.occluder_mask)));
  t.occludee = ops::add(ops::scale(occludee_boundary, static_cast<T>(w.occludee_boundary)),
                        ops::scale(occludee_mask, static_cast<T>(w.occludee_mask)));
  t.total = ops::add(t.occluder, t.occludee);
  return t;
}

template <typename T>
LossTerms<T> compute_losses(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w) {
  BasicTensor<T> occ_b = BasicTensor<T>::scalar(T(0));
  BasicTensor<T> occ_m = BasicTensor<T>::scalar(T(0));
  if (out.occluder_boundary) occ_b = bce_map_loss(*out.occluder_boundary, gt.occluder_boundary);
  if (out.occluder_mask) occ_m = bce_map_loss(*out.occluder_mask, gt.occluder_mask);
  return combine_losses(occ_b, occ_m, bce_map_loss(out.occludee_boundary, gt.occludee_boundary),
                        bce_map_loss(out.occludee_mask, gt.occludee_mask), w);
}

template <typename T>
BasicTensor<T> occluder_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w) {
  return compute_losses(out, gt, w).occluder;
}

template <typename T>
BasicTensor<T> occludee_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w) {
  return compute_losses(out, gt, w).occludee;
}

template <typename T>
BasicTensor<T> total_loss(const BilayerOutput<T>& out, const GroundTruthMaps<T>& gt, const LossWeights& w) {
  return compute_losses(out, gt, w).total;
}

#define BCNET_INSTANTIATE_LOSSES(T)                                                                        \
  template GroundTruthMaps<T> make_ground_truth<T>(const BinaryMap&, const BinaryMap&, int);              \
  template BasicTensor<T> bce_map_loss(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template LossTerms<T> combine_losses(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                       const BasicTensor<T>&, const LossWeights&);                        \
  template LossTerms<T> compute_losses(const BilayerOutput<T>&, const GroundTruthMaps<T>&, const LossWeights&); \
  template BasicTensor<T> occluder_loss(const BilayerOutput<T>&, const GroundTruthMaps<T>&, const LossWeights&); \
  template BasicTensor<T> occludee_loss(const BilayerOutput<T>&, const GroundTruthMaps<T>&, const LossWeights&); \
  template BasicTensor<T> total_loss(const BilayerOutput<T>&, const GroundTruthMaps<T>&, const LossWeights&);

BCNET_INSTANTIATE_LOSSES(float)
BCNET_INSTANTIATE_LOSSES(double)

#undef BCNET_INSTANTIATE_LOSSES

}  // namespace bcnet

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "bcnet/graph_ops.hpp"
#include "bcnet/parameters.hpp"
#include "bcnet/tensor.hpp"

namespace bcnet {

enum class Structure { kBilayer, kSingle };
enum class Operator { kGcn, kFcn };

/// Architectural variant used by the ablations.
struct HeadVariant {
  Structure structure = Structure::kBilayer;
  Operator op = Operator::kGcn;
  // When false the fusion transform is frozen at zero, so the occludee branch
  // sees the raw ROI feature.
  bool guidance = true;

  bool bilayer() const { return structure == Structure::kBilayer; }
  bool gcn() const { return op == Operator::kGcn; }

  // "bilayer-gcn", "bilayer-fcn", "single-gcn", "single-fcn"
  std::string name() const;
  static HeadVariant parse(std::string_view name);

  bool operator==(const HeadVariant&) const = default;
};

struct HeadConfig {
  int channels = 256;       // K
  int embed_channels = 0;   // theta/phi width; 0 selects K / 2
  int roi_size = 14;        // X_roi is roi_size x roi_size x K
  int image_channels = 3;   // stem input
  bool stem = true;         // include the convolutional stem over image crops
  HeadVariant variant;

  int embed() const { return embed_channels > 0 ? embed_channels : channels / 2; }
  int crop_size() const { return 2 * roi_size; }
  int output_size() const { return 2 * roi_size; }
  void validate() const;
};

template <typename T>
struct Conv {
  BasicTensor<T> weight;  // [k, k, Cin, Cout]
  BasicTensor<T> bias;    // [Cout]
};

// Stride-1 convolution with "same" padding.
template <typename T>
BasicTensor<T> conv_same(const Conv<T>& conv, const BasicTensor<T>& x);

template <typename T>
struct BranchParams {
  Conv<T> pre_conv;                 // 3x3, K -> K
  std::optional<NonLocalBlock<T>> gcn;  // Operator::kGcn
  std::optional<Conv<T>> local;     // Operator::kFcn: 3x3 K -> K in place of the graph layer
  Conv<T> fcn1;                     // 3x3, K -> K
  Conv<T> fcn2;                     // 3x3, K -> K
  Conv<T> boundary_head;            // 1x1, K -> 1 (W_B)
  Conv<T> mask_head;                // 1x1, K -> 1 (W_S)
};

template <typename T>
struct FusionParams {
  Conv<T> w_f0;  // 1x1, K -> K
};

template <typename T>
struct BranchOutput {
  BasicTensor<T> feature;   // [H, W, K]
  BasicTensor<T> boundary;  // [2H, 2W, 1] logits
  BasicTensor<T> mask;      // [2H, 2W, 1] logits
};

/// Four single-channel logit maps. The occluder maps are absent for
/// single-layer heads and for inference-mode forwards.
template <typename T>
struct BilayerOutput {
  std::optional<BasicTensor<T>> occluder_boundary;
  std::optional<BasicTensor<T>> occluder_mask;
  BasicTensor<T> occludee_boundary;
  BasicTensor<T> occludee_mask;
};

enum class ForwardMode {
  kTrain,      // all four maps
  kInference,  // occluder predictors skipped
  kVisualize,  // all four maps, no graph recording expected
};

// Graph layer of a branch: non-local GCN, or the local 3x3 stand-in for FCN variants.
template <typename T>
BasicTensor<T> relational_block(const BranchParams<T>& p, const BasicTensor<T>& x);

// pre_conv -> graph layer -> FCN -> upsample -> {W_B, W_S}.
template <typename T>
BranchOutput<T> occluder_branch(const BranchParams<T>& p, const BasicTensor<T>& x_roi, bool with_heads = true);

// X_f = W_f0 * z0 + X_roi
template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& z0, const BasicTensor<T>& x_roi, const FusionParams<T>& fp);

// Returns (boundary, mask) logits.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> occludee_branch(const BranchParams<T>& p, const BasicTensor<T>& x_f);

/// Mask head plus the optional stem. Parameters live in a named set so the
/// same object can be rebuilt from a checkpoint or cast to another scalar type.
template <typename T>
class BilayerHead {
 public:
  static BilayerHead init(const HeadConfig& config, std::uint64_t seed);
  // Rebuilds the structure from named tensors; throws UsageError on a missing name.
  static BilayerHead bind(const HeadConfig& config, ParameterSet<T> params);

  const HeadConfig& config() const { return config_; }
  const ParameterSet<T>& parameters() const { return params_; }
  ParameterSet<T>& parameters() { return params_; }

  // Names held at zero and excluded from optimization.
  bool is_frozen(std::string_view name) const;

  const std::optional<BranchParams<T>>& occluder() const { return occluder_; }
  const std::optional<FusionParams<T>>& fusion() const { return fusion_; }
  const BranchParams<T>& occludee() const { return occludee_; }

  // [2H, 2W, C_img] image crop -> [H, W, K] ROI feature.
  BasicTensor<T> stem_forward(const BasicTensor<T>& crop) const;
  BilayerOutput<T> forward(const BasicTensor<T>& x_roi, ForwardMode mode = ForwardMode::kTrain) const;
  BilayerOutput<T> forward_image(const BasicTensor<T>& crop, ForwardMode mode = ForwardMode::kTrain) const;

  template <typename U>
  BilayerHead<U> cast() const {
    return BilayerHead<U>::bind(config_, params_.template cast<U>());
  }

 private:
  HeadConfig config_;
  ParameterSet<T> params_;
  std::optional<Conv<T>> stem1_, stem2_;
  std::optional<BranchParams<T>> occluder_;
  std::optional<FusionParams<T>> fusion_;
  BranchParams<T> occludee_;
};

extern template class BilayerHead<float>;
extern template class BilayerHead<double>;

}  // namespace bcnet

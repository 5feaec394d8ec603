#pragma once

#include "bcnet/tensor.hpp"

// Differentiable operators. Spatial maps use HWC layout: a feature map is
// [H, W, C] and a conv kernel is [k, k, Cin, Cout].
namespace bcnet::ops {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

// x: [..., C] plus bias [C] broadcast over all leading positions.
template <typename T>
BasicTensor<T> add_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

// Per-row (x - mean) / sqrt(var + eps) over the last dimension of [N, K].
// No learned affine.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, double eps = kLayerNormEps);

// Row-wise softmax of [N, M] with max subtraction. NaN input throws NumericError.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

// Cross-correlation with zero padding. x: [H, W, Cin], w: [k, k, Cin, Cout], b: [Cout].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                      int stride = 1, int pad = 0);

// [H, W, C] -> [2H, 2W, C], bilinear with half-pixel centers (align_corners = false).
template <typename T>
BasicTensor<T> bilinear_upsample2x(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// [H, W, K] <-> [H*W, K]
template <typename T>
BasicTensor<T> flatten_spatial(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> unflatten_spatial(const BasicTensor<T>& x, std::size_t height, std::size_t width);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// Mean over pixels of the logit-form binary cross-entropy
// max(z,0) - z*t + log(1 + exp(-|z|)). `target` carries no gradient.
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& target);

}  // namespace bcnet::ops

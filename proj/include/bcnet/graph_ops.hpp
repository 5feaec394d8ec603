#pragma once

#include "bcnet/tensor.hpp"

namespace bcnet {

/// Non-local graph convolution parameters.
///
/// theta/phi are 1x1 embeddings K -> embed (stored as [K, embed] matrices plus
/// bias); w_g is the K x K output transform. Node features are rows of an
/// [N, K] matrix with N = H * W.
template <typename T>
struct NonLocalBlock {
  BasicTensor<T> theta_w;  // [K, E]
  BasicTensor<T> theta_b;  // [E]
  BasicTensor<T> phi_w;    // [K, E]
  BasicTensor<T> phi_b;    // [E]
  BasicTensor<T> w_g;      // [K, K]

  std::size_t channels() const { return w_g.dim(0); }
  std::size_t embed_channels() const { return theta_w.dim(1); }
  void validate() const;
};

// A = softmax_rows((X theta)(X phi)^T), row-stochastic [N, N].
template <typename T>
BasicTensor<T> build_adjacency(const NonLocalBlock<T>& block, const BasicTensor<T>& x);

// Z = ReLU(LayerNorm(A X W_g)) + X.
template <typename T>
BasicTensor<T> gcn_forward(const NonLocalBlock<T>& block, const BasicTensor<T>& x);

// Same as gcn_forward but also hands back the adjacency it used.
template <typename T>
BasicTensor<T> gcn_forward(const NonLocalBlock<T>& block, const BasicTensor<T>& x, BasicTensor<T>* adjacency);

extern template struct NonLocalBlock<float>;
extern template struct NonLocalBlock<double>;

}  // namespace bcnet

#include "bcnet/graph_ops.hpp"

#include "bcnet/errors.hpp"
#include "bcnet/ops.hpp"

namespace bcnet {

template <typename T>
void NonLocalBlock<T>::validate() const {
  const std::size_t k = w_g.dim(0);
  if (w_g.rank() != 2 || w_g.dim(1) != k) {
    throw DimensionError("NonLocalBlock: w_g must be square, got " + shape_to_string(w_g.shape()));
  }
  if (theta_w.shape() != phi_w.shape()) {
    throw DimensionError("NonLocalBlock: theta " + shape_to_string(theta_w.shape()) + " and phi " +
                         shape_to_string(phi_w.shape()) + " embeddings differ");
  }
  if (theta_w.rank() != 2 || theta_w.dim(0) != k) {
    throw DimensionError("NonLocalBlock: theta must be [K, E] with K = " + std::to_string(k));
  }
  if (theta_b.numel() != theta_w.dim(1) || phi_b.numel() != phi_w.dim(1)) {
    throw DimensionError("NonLocalBlock: embedding bias width mismatch");
  }
}

template <typename T>
BasicTensor<T> build_adjacency(const NonLocalBlock<T>& block, const BasicTensor<T>& x) {
  block.validate();
  if (x.rank() != 2 || x.dim(1) != block.channels()) {
    throw DimensionError("build_adjacency: node features " + shape_to_string(x.shape()) + " do not have " +
                         std::to_string(block.channels()) + " channels");
  }
  auto t = ops::add_bias(ops::matmul(x, block.theta_w), block.theta_b);
  auto p = ops::add_bias(ops::matmul(x, block.phi_w), block.phi_b);
  return ops::softmax_rows(ops::matmul(t, ops::transpose(p)));
}

template <typename T>
BasicTensor<T> gcn_forward(const NonLocalBlock<T>& block, const BasicTensor<T>& x, BasicTensor<T>* adjacency) {
  auto a = build_adjacency(block, x);
  auto propagated = ops::matmul(ops::matmul(a, x), block.w_g);
  auto z = ops::add(ops::relu(ops::layer_norm(propagated)), x);
  if (adjacency) *adjacency = a;
  return z;
}

template <typename T>
BasicTensor<T> gcn_forward(const NonLocalBlock<T>& block, const BasicTensor<T>& x) {
  return gcn_forward(block, x, static_cast<BasicTensor<T>*>(nullptr));
}

template struct NonLocalBlock<float>;
template struct NonLocalBlock<double>;
template BasicTensor<float> build_adjacency(const NonLocalBlock<float>&, const BasicTensor<float>&);
template BasicTensor<double> build_adjacency(const NonLocalBlock<double>&, const BasicTensor<double>&);
template BasicTensor<float> gcn_forward(const NonLocalBlock<float>&, const BasicTensor<float>&);
template BasicTensor<double> gcn_forward(const NonLocalBlock<double>&, const BasicTensor<double>&);
template BasicTensor<float> gcn_forward(const NonLocalBlock<float>&, const BasicTensor<float>&, BasicTensor<float>*);
template BasicTensor<double> gcn_forward(const NonLocalBlock<double>&, const BasicTensor<double>&,
                                         BasicTensor<double>*);

}  // namespace bcnet

#include "bcnet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "bcnet/errors.hpp"

namespace bcnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
std::vector<T>& BasicTensor<T>::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
BasicTensor<T>::BasicTensor() : node_(std::make_shared<Node>()) {
  node_->shape = {1};
  node_->data = {T(0)};
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, bool requires_grad) : node_(std::make_shared<Node>()) {
  check_shape(shape);
  node_->data.assign(shape_numel(shape), T(0));
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return BasicTensor(std::move(shape), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  BasicTensor t(std::move(shape), requires_grad);
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_node(std::shared_ptr<Node> node) {
  BasicTensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (node_->data.size() != 1) {
    throw DimensionError("item() needs a single-element tensor, got " + shape_to_string(node_->shape));
  }
  return node_->data[0];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw UsageError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = on;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void BasicTensor<T>::backward() const {
  ComputeGraph<T>::trace(*this).backward();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(node_->shape, node_->data, false);
}

template <typename T>
ComputeGraph<T> ComputeGraph<T>::trace(const BasicTensor<T>& root) {
  ComputeGraph g;
  std::unordered_set<const Node*> visited;
  // Iterative post-order DFS: (node, next parent index).
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (visited.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      g.order_.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

template <typename T>
void ComputeGraph<T>::backward() const {
  if (order_.empty()) return;
  Node& root = *order_.back();
  if (root.data.size() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_to_string(root.shape));
  }
  if (!root.requires_grad) throw UsageError("backward() on a tensor that does not require grad");
  // Interior grads are per-pass scratch; leaves keep accumulating.
  for (const auto& node : order_) {
    if (!node->is_leaf() && node->requires_grad) node->grad.assign(node->data.size(), T(0));
  }
  root.grad_buffer()[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node& node = **it;
    if (node.requires_grad && node.backward_fn) node.backward_fn(node);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class ComputeGraph<float>;
template class ComputeGraph<double>;

}  // namespace bcnet

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bcnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
// Thread-local switch; when > 0 no graph is recorded.
inline thread_local int no_grad_depth = 0;
}  // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// Disables graph recording for the lifetime of the guard.
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Dense row-major tensor with reverse-mode gradient tracking.
///
/// Copies are shallow: two BasicTensor values may refer to the same node.
/// Leaves are created by the constructors; every op result is an interior
/// node that remembers its parents and a backward rule.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until the first backward touches the node
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads `self.grad` and accumulates into the parents' grads.
    std::function<void(Node& self)> backward_fn;

    bool is_leaf() const { return parents.empty(); }
    // Zero-initializes grad if it has not been allocated yet.
    std::vector<T>& grad_buffer();
  };

  BasicTensor();
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }
  bool defined() const { return static_cast<bool>(node_); }

  std::span<const T> data() const { return node_->data; }
  // Direct writes are meant for leaves (parameters, inputs) only.
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  bool is_leaf() const { return node_->is_leaf(); }
  const char* op_name() const { return node_->op; }

  // Gradients accumulate into leaves across calls; see zero_grads().
  void backward() const;

  // New leaf sharing no storage with this tensor.
  BasicTensor detach() const;
  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return BasicTensor<U>(node_->shape, std::move(out), node_->requires_grad);
  }

  const std::shared_ptr<Node>& node() const { return node_; }
  static BasicTensor from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;

/// Topologically ordered record of the operations that produced `root`.
/// Every node appears after all of its parents.
template <typename T>
class ComputeGraph {
 public:
  using Node = typename BasicTensor<T>::Node;

  static ComputeGraph trace(const BasicTensor<T>& root);

  const std::vector<std::shared_ptr<Node>>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

  // Seeds d(root)/d(root) = 1 and replays backward rules in reverse order.
  void backward() const;

 private:
  std::vector<std::shared_ptr<Node>> order_;
};

template <typename T>
void zero_grads(std::span<BasicTensor<T>> tensors) {
  for (auto& t : tensors) t.zero_grad();
}

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template class ComputeGraph<float>;
extern template class ComputeGraph<double>;

}  // namespace bcnet

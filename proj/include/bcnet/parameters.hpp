#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bcnet/errors.hpp"
#include "bcnet/tensor.hpp"

namespace bcnet {

// Ordered, named collection of trainable leaves. Entries are shallow handles:
// the model structs and the set refer to the same tensor nodes.
template <typename T>
class ParameterSet {
 public:
  using Entry = std::pair<std::string, BasicTensor<T>>;

  void add(std::string name, BasicTensor<T> tensor) {
    if (contains(name)) throw UsageError("duplicate parameter name: " + name);
    entries_.emplace_back(std::move(name), std::move(tensor));
  }

  bool contains(std::string_view name) const {
    for (const auto& [n, _] : entries_) {
      if (n == name) return true;
    }
    return false;
  }

  const BasicTensor<T>& at(std::string_view name) const {
    for (const auto& [n, t] : entries_) {
      if (n == name) return t;
    }
    throw UsageError("missing parameter: " + std::string(name));
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [_, t] : entries_) t.zero_grad();
  }

  // Deep copy, optionally converting the scalar type.
  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& [n, t] : entries_) out.add(n, t.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace bcnet

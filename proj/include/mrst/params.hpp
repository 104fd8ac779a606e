#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mrst/tensor.hpp"

namespace mrst {

// Which slice of the model a parameter belongs to: weights shared across
// tasks, or one task's conditional-instance-norm bank row.
struct Partition {
  static constexpr int kShared = -1;
  int task = kShared;

  static Partition shared() { return Partition{}; }
  static Partition for_task(int t) { return Partition{t}; }
  bool is_shared() const { return task == kShared; }
  bool operator==(const Partition&) const = default;
};

inline std::string to_string(const Partition& p) {
  return p.is_shared() ? "shared" : "task:" + std::to_string(p.task);
}

inline Partition partition_from_string(const std::string& s) {
  if (s == "shared") return Partition::shared();
  if (s.rfind("task:", 0) == 0)
    return Partition::for_task(std::stoi(s.substr(5)));
  throw FormatError("unknown partition label '" + s + "'");
}

// Ordered, name-addressed collection of learnable tensors. Iteration order
// is insertion order and therefore deterministic; checkpoints serialize
// entries in this order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    Partition partition;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> tensor,
                 Partition partition = Partition::shared()) {
    if (index_.contains(name))
      throw ArgumentError("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(tensor), partition});
    return entries_.back().tensor;
  }

  bool contains(const std::string& name) const {
    return index_.contains(name);
  }

  const Tensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      throw StateError("missing parameter '" + name + "'");
    return entries_[it->second].tensor;
  }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw StateError("missing parameter '" + name + "'");
    return entries_[it->second].tensor;
  }

  std::span<const Entry> entries() const { return entries_; }
  std::span<Entry> entries() { return entries_; }
  size_t size() const { return entries_.size(); }

  int64_t total_parameters() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  void set_requires_grad(bool v) {
    for (auto& e : entries_) e.tensor.set_requires_grad(v);
  }

  void clear_grads() {
    for (auto& e : entries_) e.tensor.clear_grad();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_)
      out.add(e.name, e.tensor.template cast<U>(), e.partition);
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace mrst

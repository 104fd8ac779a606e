#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrst/errors.hpp"

namespace mrst {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense n-dimensional array, row-major, with an optional gradient buffer.
// Image tensors use batch-channel-height-width order. Tensor is a shared
// handle: copies alias the same storage, which is what the tape relies on
// to route gradients back to the tensors a caller holds.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    check_shape(shape);
    auto s = std::make_shared<Storage>();
    s->shape = std::move(shape);
    s->data.assign(static_cast<size_t>(shape_numel(s->shape)), value);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
  }

  static Tensor from_data(Shape shape, std::vector<T> data,
                          bool requires_grad = false) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    auto s = std::make_shared<Storage>();
    s->shape = std::move(shape);
    s->data = std::move(data);
    s->requires_grad = requires_grad;
    return Tensor(std::move(s));
  }

  // Deep copy of values; grad buffer is not copied.
  Tensor clone(bool requires_grad = false) const {
    require_defined();
    return from_data(s_->shape, s_->data, requires_grad);
  }

  // Same values as a fresh leaf with no gradient participation.
  Tensor detached() const { return clone(false); }

  template <typename U>
  Tensor<U> cast() const {
    require_defined();
    std::vector<U> out(s_->data.size());
    for (size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<U>(s_->data[i]);
    return Tensor<U>::from_data(s_->shape, std::move(out), s_->requires_grad);
  }

  bool defined() const { return s_ != nullptr; }

  const Shape& shape() const {
    require_defined();
    return s_->shape;
  }

  int64_t dim(size_t i) const { return shape().at(i); }
  size_t rank() const { return shape().size(); }
  int64_t numel() const { return static_cast<int64_t>(s_->data.size()); }

  std::span<T> data() {
    require_defined();
    return s_->data;
  }
  std::span<const T> data() const {
    require_defined();
    return s_->data;
  }

  T value() const {
    if (numel() != 1) throw DimensionError("value() requires a scalar tensor");
    return s_->data[0];
  }

  bool requires_grad() const {
    require_defined();
    return s_->requires_grad;
  }
  void set_requires_grad(bool v) {
    require_defined();
    s_->requires_grad = v;
    if (!v) s_->grad.reset();
  }

  bool has_grad() const { return defined() && s_->grad.has_value(); }

  std::span<T> grad() {
    if (!has_grad()) throw StateError("tensor has no gradient buffer");
    return *s_->grad;
  }
  std::span<const T> grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient buffer");
    return *s_->grad;
  }

  // Adds `values` into the grad buffer, allocating it on first use.
  // No-op for tensors that do not require grad. The handle is const: the
  // mutation targets the shared storage, matching shared_ptr semantics.
  void accumulate_grad(std::span<const T> values) const {
    require_defined();
    if (!s_->requires_grad) return;
    if (values.size() != s_->data.size())
      throw DimensionError("gradient size mismatch");
    if (!s_->grad) s_->grad.emplace(s_->data.size(), T(0));
    T* g = s_->grad->data();
    for (size_t i = 0; i < values.size(); ++i) g[i] += values[i];
  }

  void clear_grad() {
    require_defined();
    s_->grad.reset();
  }

  bool all_finite() const {
    require_defined();
    for (T v : s_->data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Storage identity; two handles alias iff their ids are equal.
  const void* id() const { return s_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::optional<std::vector<T>> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> s) : s_(std::move(s)) {}

  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
    for (int64_t d : shape)
      if (d <= 0)
        throw DimensionError("tensor extents must be positive, got " +
                             shape_str(shape));
  }

  void require_defined() const {
    if (!s_) throw StateError("operation on an undefined tensor");
  }

  std::shared_ptr<Storage> s_;
};

}  // namespace mrst

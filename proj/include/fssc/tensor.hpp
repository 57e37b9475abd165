#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fssc/errors.hpp"

namespace fssc {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct TensorNode {
  Shape shape;
  Vec<Scalar> value;
  Vec<Scalar> grad;  // empty until the first accumulation
  bool requires_grad = false;

  void accumulate(const Eigen::Ref<const Vec<Scalar>>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  Vec<Scalar>& grad_buffer() {
    if (grad.size() == 0) grad = Vec<Scalar>::Zero(value.size());
    return grad;
  }
};

/// Dense row-major N-d array. Copies share storage; use clone() for a deep copy.
template <typename Scalar>
class Tensor {
 public:
  using scalar_type = Scalar;
  using Node = TensorNode<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    check_shape(shape);
    node_->value = Vec<Scalar>::Zero(shape_numel(shape));
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, Vec<Scalar> values, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    check_shape(shape);
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }
  static Tensor full(Shape shape, Scalar v, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    t.value().setConstant(v);
    return t;
  }
  static Tensor scalar(Scalar v, bool requires_grad = false) {
    return full(Shape{1}, v, requires_grad);
  }
  static Tensor from(Shape shape, std::initializer_list<Scalar> values, bool requires_grad = false) {
    Vec<Scalar> v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index dim(Index i) const { return node_->shape[static_cast<std::size_t>(i < 0 ? rank() + i : i)]; }
  Index numel() const { return node_->value.size(); }

  Vec<Scalar>& value() { return node_->value; }
  const Vec<Scalar>& value() const { return node_->value; }
  Scalar* data() { return node_->value.data(); }
  const Scalar* data() const { return node_->value.data(); }
  Scalar item() const { return node_->value[0]; }
  Scalar operator[](Index i) const { return node_->value[i]; }

  /// Row-major matrix view with the given extents (must cover numel()).
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    return {node_->value.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    return {node_->value.data(), rows, cols};
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() != 0; }
  Vec<Scalar>& grad() { return node_->grad; }
  const Vec<Scalar>& grad() const { return node_->grad; }
  /// Drops the accumulated gradient.
  void clear_grad() { node_->grad.resize(0); }

  /// Deep copy of values; the copy does not track gradients.
  Tensor clone() const { return Tensor(shape(), value(), false); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape(), value().template cast<Other>(), false);
  }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  static void check_shape(const Shape& shape) {
    for (Index e : shape) {
      if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
  }

  std::shared_ptr<Node> node_;
};

/// Ordered record of backward closures. Operations record onto the tape that
/// is active on the current thread; with no active tape nothing is recorded.
template <typename Scalar>
class Tape {
 public:
  using Backward = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Backward fn) { entries_.push_back(std::move(fn)); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(root)/d(root) = 1 and replays the recorded closures in reverse.
  void backward(Tensor<Scalar>& root) {
    if (!root.requires_grad()) {
      throw TrainingError("backward() called on a tensor that does not require grad");
    }
    root.node()->grad_buffer().setOnes();
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

  static Tape* active() { return active_; }

 private:
  template <typename>
  friend class TapeScope;
  static inline thread_local Tape* active_ = nullptr;

  std::vector<Backward> entries_;
};

/// Makes a tape the active one for the current thread for the scope's lifetime.
template <typename Scalar>
class TapeScope {
 public:
  explicit TapeScope(Tape<Scalar>& tape) : previous_(Tape<Scalar>::active_) {
    Tape<Scalar>::active_ = &tape;
  }
  ~TapeScope() { Tape<Scalar>::active_ = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Scalar>* previous_;
};

namespace detail {

template <typename Scalar>
bool any_requires_grad(std::initializer_list<const Tensor<Scalar>*> inputs) {
  if (Tape<Scalar>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

/// Builds an operation result and registers its backward closure when any
/// input participates in the active tape. The closure receives the output
/// node; it is skipped if no gradient reached the output.
template <typename Scalar, typename Fn>
Tensor<Scalar> make_result(Shape shape, Vec<Scalar> value,
                           std::initializer_list<const Tensor<Scalar>*> inputs, Fn&& backward) {
  const bool track = any_requires_grad<Scalar>(inputs);
  Tensor<Scalar> out(std::move(shape), std::move(value), track);
  if (track) {
    Tape<Scalar>::active()->record(
        [out_node = out.node(), fn = std::forward<Fn>(backward)]() mutable {
          if (out_node->grad.size() == 0) return;
          fn(*out_node);
        });
  }
  return out;
}

}  // namespace detail

}  // namespace fssc

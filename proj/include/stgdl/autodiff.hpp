#pragma once

// Dense reverse-mode differentiation over row-major 64-bit tensors.
//
// A Tape records every operation of one computation. Operations take and
// return Var handles (tape + node id). Leaves are either tracked (gradients
// requested) or constants; an operation is tracked when any input is.
// backward() replays the tape in reverse and returns gradients for every
// tracked leaf. Tapes are single-use per training step and are not
// thread-safe; Tensors are plain values.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stgdl::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Leaves value-initialized elements uninitialized; explicit fills still apply.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  DefaultInitAllocator() = default;
  template <typename U>
  DefaultInitAllocator(const DefaultInitAllocator<U>&) noexcept {}
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) == 0)
      ::new (static_cast<void*>(p)) U;
    else
      ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

class Tensor {
 public:
  using Storage = std::vector<double, DefaultInitAllocator<double>>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Storage with unspecified contents; every element must be written before use.
  static Tensor uninitialized(Shape shape);
  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Element (i, j) of a rank-2 tensor.
  double& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }

  /// The single value of a one-element tensor.
  double item() const;

  bool all_finite() const noexcept;

  /// Same values under a new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Tensor(Shape shape, Storage values) : shape_(std::move(shape)), values_(std::move(values)) {}

  Shape shape_;
  Storage values_;
};

using NodeId = std::size_t;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  NodeId id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool tracked() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// What a recorded operation sees when its gradient rule runs.
struct BackwardArgs {
  const Tensor& output;
  const Tensor& grad_output;
  std::span<const Tensor* const> inputs;
  std::span<Tensor* const> grads;  // nullptr for untracked inputs
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

class Gradients {
 public:
  const Tensor& of(Var v) const;
  const Tensor& of(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  const std::unordered_map<NodeId, Tensor>& all() const { return grads_; }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tracked leaf.
  Var leaf(Tensor value);
  /// Untracked input.
  Var constant(Tensor value);
  /// Records an operation. Throws if the forward value is not finite while
  /// all inputs are.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn rule, const char* op_name);

  /// Gradients of a scalar loss with respect to every tracked leaf.
  Gradients backward(Var loss) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool tracked(NodeId id) const { return nodes_.at(id).tracked; }

 private:
  struct Node {
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn rule;
    bool tracked = false;
    bool leaf = false;
  };
  std::deque<Node> nodes_;  // stable addresses: values stay referenceable while recording
};

// ---- operations -----------------------------------------------------------

enum class ElementwiseKind { add, sub, hadamard, tanh, scale, affine };

/// Parameters for the unary kinds: scale(c) multiplies by `a`; affine(a, b)
/// computes a·x + b.
struct ElementwiseSpec {
  ElementwiseKind kind;
  double a = 1.0;
  double b = 0.0;
};

Var elementwise(const ElementwiseSpec& spec, Var x);
Var elementwise(const ElementwiseSpec& spec, Var x, Var y);

Var add(Var x, Var y);
Var sub(Var x, Var y);
Var hadamard(Var x, Var y);
Var tanh(Var x);
Var scale(Var x, double c);
Var affine(Var x, double a, double b);

/// Rank-2 matrix product.
Var matmul(Var a, Var b);
/// x[..., k] · w[k, n] → [..., n]; every leading axis is a batch axis.
Var matmul_last(Var x, Var w);
/// Applies the square matrix w along one axis of x:
/// y[..., i, ...] = Σ_j w[i, j] x[..., j, ...].
Var mix(Var w, Var x, std::size_t axis);
Var transpose(Var a);
Var reshape(Var x, Shape shape);
Var permute(Var x, std::vector<std::size_t> perm);

enum class ReduceKind { sum, mean, l1 };

Var reduce(ReduceKind kind, Var x);
Var sum(Var x);
Var mean(Var x);
/// Sum of absolute values after flattening; the subgradient at 0 is 0.
Var l1(Var x);

// ---- finite-difference oracle ---------------------------------------------

/// Builds a scalar from tracked parameters placed on the given tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

/// Compares backward() against central differences (f(p+eps)-f(p-eps))/(2 eps)
/// for every coordinate. The error of one coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
FiniteDiffResult finite_diff_check(const ScalarFn& f, const std::vector<Tensor>& params,
                                   double eps = 1e-6, double floor = 1e-3);

}  // namespace stgdl::ad

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gmlab/error.hpp"
#include "gmlab/rng.hpp"

namespace gmlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;
  bool backward_done = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;  // scatter this->grad into parents

  std::size_t numel() const { return val.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(val.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;
NodePtr make_node(Shape shape, std::vector<double> val, bool requires_grad,
                  const char* op_name);

}  // namespace detail

/// Dense row-major float64 array participating in a define-by-run tape.
/// Tensors are cheap handles; the tape is the implicit graph of parent
/// references, freed when the downstream tensors go out of scope.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor param(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return constant({1}, {v}); }
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor one_hot(std::size_t n, std::size_t index);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->numel(); }
  std::size_t rank() const { return node_->shape.size(); }
  const std::vector<double>& values() const { return node_->val; }
  /// Leaf mutation hook for optimizers; never call on tape interior nodes.
  std::vector<double>& mutable_values() { return node_->val; }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad() { node_->grad.clear(); }

  double item() const;

  detail::NodePtr node() const { return node_; }

 private:
  detail::NodePtr node_;
};

// ---- elementwise (standard trailing-dimension broadcasting) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- unary ----
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);

// ---- reductions ----
Tensor sum(const Tensor& a);        // -> {1}
Tensor mean(const Tensor& a);       // -> {1}
Tensor sum_last(const Tensor& a);   // drops last axis; {M,L}->{M}, {L}->{1}

// ---- softmax family (last axis) ----
Tensor softmax_last(const Tensor& a);
Tensor logsumexp_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);

// ---- structural ----
/// Right shift by one along the last axis, zero fill at position 0;
/// the last element is dropped.
Tensor shift_last(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len);
Tensor rows(const Tensor& a, const std::vector<std::size_t>& indices);
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& v);  // {M,K}x{K} -> {M}
Tensor dot(const Tensor& a, const Tensor& b);     // {K}x{K} -> {1}
Tensor reshape(const Tensor& a, Shape shape);
Tensor diag_part(const Tensor& a);  // {D,D} -> {D}

/// Forward pass takes the given values; gradients flow unchanged into
/// `surrogate` (straight-through estimator plumbing).
Tensor straight_through(std::vector<double> forward_values,
                        const Tensor& surrogate);

/// Solve L Z = B with L lower-triangular {D,D} (upper part ignored),
/// B {D,M}.  Differentiable w.r.t. both arguments.
Tensor trisolve_lower(const Tensor& L, const Tensor& B);

/// Detached constant holding a's values.
Tensor detach(const Tensor& a);

// ---- backward ----
/// Populates grad on every requires_grad leaf reachable from `loss`.
/// `loss` must be a scalar on the tape; calling twice on the same loss
/// is an error.
void backward(const Tensor& loss);

// ---- seeded sampling (all results are tape-detached constants) ----
Tensor sample_uniform01(Rng& rng, Shape shape);
Tensor sample_standard_normal(Rng& rng, Shape shape);
Tensor sample_gumbel01(Rng& rng, Shape shape);
Tensor sample_bernoulli(Rng& rng, const std::vector<double>& p, Shape shape);
std::size_t sample_categorical(Rng& rng, const std::vector<double>& w);

}  // namespace gmlab

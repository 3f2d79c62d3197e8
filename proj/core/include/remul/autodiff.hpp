#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "remul/tensor.hpp"

namespace remul {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  div,
  matmul,
  sum,
  mean,
  relu,
  tanh,
  gelu_approx,
  softmax_lastdim,
  layernorm_lastdim,
  square,
  sqrt,
  abs,
  l2norm,
  concat_lastdim,
  gather_rows,
  scatter_add_rows,
  scale,
  broadcast_add,
  reshape,
};

std::string_view to_string(OpKind kind);

namespace detail {
struct Node;
}

/// Handle to a node of the reverse-mode graph.
///
/// Copies share the node. Leaves are either constants (no gradient) or
/// parameters (gradient accumulated by backward()).
class TapeValue {
 public:
  TapeValue() = default;

  static TapeValue constant(Tensor value);
  static TapeValue parameter(Tensor value);

  const Tensor& value() const;
  // Zero tensor of value's shape until a backward pass writes into it.
  const Tensor& gradient() const;
  bool requires_grad() const;
  OpKind kind() const;
  const Shape& shape() const { return value().shape(); }

  void zero_gradient() const;

  // Leaves only; shape must stay the same.
  void set_value(Tensor value) const;
  std::span<double> mutable_data() const;

  explicit operator bool() const { return static_cast<bool>(node_); }
  bool same_node(const TapeValue& other) const { return node_ == other.node_; }

 private:
  friend struct TapeAccess;
  explicit TapeValue(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread while alive. Values are still
/// computed and checked; nothing is retained for backward().
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Shared row-index list used by gather/scatter.
using RowIndex = std::shared_ptr<const std::vector<std::size_t>>;

RowIndex make_row_index(std::vector<std::size_t> rows);

namespace ops {

// Elementwise; both operands must have identical shapes.
TapeValue add(const TapeValue& a, const TapeValue& b);
TapeValue sub(const TapeValue& a, const TapeValue& b);
TapeValue mul(const TapeValue& a, const TapeValue& b);
TapeValue div(const TapeValue& a, const TapeValue& b);

// (R x K) * (K x C) -> (R x C). Both operands rank 2.
TapeValue matmul(const TapeValue& a, const TapeValue& b);

// Full reductions to a rank-0 scalar.
TapeValue sum(const TapeValue& x);
TapeValue mean(const TapeValue& x);
// Frobenius norm of all entries; gradient at zero is taken as zero.
TapeValue l2norm(const TapeValue& x);

TapeValue relu(const TapeValue& x);
TapeValue tanh(const TapeValue& x);
// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
TapeValue gelu_approx(const TapeValue& x);
TapeValue square(const TapeValue& x);
// Requires x >= 0; gradient at exactly zero is taken as zero.
TapeValue sqrt(const TapeValue& x);
// Subgradient 0 at x == 0.
TapeValue abs(const TapeValue& x);
TapeValue scale(const TapeValue& x, double factor);

// Softmax over the last dimension, independently per row.
TapeValue softmax_lastdim(const TapeValue& x);
// Per-row normalization over the last dimension followed by gain and bias,
// both of shape [cols]. Variance is the biased estimator; epsilon = 1e-5.
TapeValue layernorm_lastdim(const TapeValue& x, const TapeValue& gain, const TapeValue& bias);
inline constexpr double kLayerNormEpsilon = 1e-5;

// Inputs share rows(); output cols is the sum of input cols. Rank 2.
TapeValue concat_lastdim(std::span<const TapeValue> parts);
TapeValue concat_lastdim(std::initializer_list<TapeValue> parts);

// out[k] = x[rows[k]]. x is rank 2.
TapeValue gather_rows(const TapeValue& x, const RowIndex& rows);
// out[rows[k]] += x[k]; out has out_rows rows. x is rank 2.
TapeValue scatter_add_rows(const TapeValue& x, const RowIndex& rows, std::size_t out_rows);

// x (R x C) plus bias (shape [C] or [1, C]) added to every row.
TapeValue broadcast_add(const TapeValue& x, const TapeValue& bias);

// Row-major reinterpretation; element count must match.
TapeValue reshape(const TapeValue& x, Shape shape);

}  // namespace ops

/// Non-tensor arguments for the generic primitive() dispatcher.
struct PrimitiveArgs {
  double factor = 1.0;                 // scale
  RowIndex rows;                       // gather_rows / scatter_add_rows
  std::size_t out_rows = 0;            // scatter_add_rows
  Shape shape;                         // reshape
};

/// Applies a primitive by kind. Shape errors name the kind and the shapes.
TapeValue primitive(OpKind kind, std::span<const TapeValue> inputs, const PrimitiveArgs& args = {});

/// Reverse pass from a one-element root.
///
/// The root's gradient is seeded with one. Intermediate gradients are
/// recomputed on each call; leaf parameter gradients accumulate across calls
/// until reset with zero_gradient().
void backward(const TapeValue& root);

/// Ordered, named parameter blocks. Copies share the underlying leaves; use
/// clone() for an independent deep copy.
class ParamTree {
 public:
  struct Entry {
    std::string name;
    TapeValue value;
  };

  TapeValue& add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  const TapeValue& at(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void set_last_layer(std::string name);
  const std::string& last_layer() const { return last_layer_; }

  void zero_gradients() const;
  std::vector<Tensor> gradients() const;
  std::vector<Tensor> values() const;
  void set_values(std::span<const Tensor> values) const;
  std::size_t parameter_count() const;

  ParamTree clone() const;

 private:
  std::vector<Entry> entries_;
  std::string last_layer_;
};

/// Central differences (L(theta + eps e) - L(theta - eps e)) / (2 eps) for
/// every coordinate. Parameter values are restored afterwards.
std::vector<Tensor> finite_difference_gradient(const std::function<double(const ParamTree&)>& loss_fn,
                                               const ParamTree& params, double epsilon);

struct Coordinate {
  std::size_t block;
  std::size_t index;
};

/// Same as finite_difference_gradient, for a chosen subset of coordinates.
std::vector<double> finite_difference_at(const std::function<double(const ParamTree&)>& loss_fn,
                                         const ParamTree& params, std::span<const Coordinate> coords,
                                         double epsilon);

}  // namespace remul

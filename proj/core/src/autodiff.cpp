#include "remul/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "remul/errors.hpp"

namespace remul {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool grad_ready = false;
  bool requires_grad = false;
  bool is_leaf = true;
  OpKind kind = OpKind::leaf;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::span<double> grad_buffer() {
    if (!grad_ready) {
      grad = Tensor(value.shape(), 0.0);
      grad_ready = true;
    }
    return grad.data();
  }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

struct TapeAccess {
  static const NodePtr& node(const TapeValue& v) { return v.node_; }
  static TapeValue wrap(NodePtr n) { return TapeValue(std::move(n)); }
};

namespace {

thread_local bool t_grad_enabled = true;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

const NodePtr& node_of(const TapeValue& v) {
  if (!v) throw ValidationError("use of an empty TapeValue");
  return TapeAccess::node(v);
}

[[noreturn]] void shape_error(OpKind kind, std::initializer_list<Shape> shapes, const std::string& why = {}) {
  std::string msg = std::string(to_string(kind)) + ": incompatible shapes";
  for (const auto& s : shapes) msg += " " + shape_string(s);
  if (!why.empty()) msg += " (" + why + ")";
  throw ValidationError(msg);
}

TapeValue make_result(OpKind kind, Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(to_string(kind)) + ": non-finite output of shape " + shape_string(value.shape()));
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->kind = kind;
  node->is_leaf = false;
  bool needs = false;
  if (t_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return TapeAccess::wrap(std::move(node));
}

// Adds g into the parent's gradient when it participates in differentiation.
void accumulate(Node& parent, std::span<const double> g) {
  if (!parent.requires_grad) return;
  auto buf = parent.grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

// Elementwise unary op with a derivative expressed from (x, y).
template <class F, class D>
TapeValue elementwise(OpKind kind, const TapeValue& x, F&& f, D&& dfdx) {
  const auto& xn = node_of(x);
  Tensor out(xn->value.shape(), std::vector<double>(xn->value.size()));
  auto in = xn->value.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
  return make_result(kind, std::move(out), {xn}, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto xin = p.value.data();
    auto y = self.value.data();
    auto dy = self.grad.data();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dy[i] * dfdx(xin[i], y[i]);
  });
}

void require_same_shape(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(kind, {a.shape(), b.shape()});
}

void require_rank2(OpKind kind, const Tensor& a) {
  if (a.rank() != 2) shape_error(kind, {a.shape()}, "rank 2 required");
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::div: return "div";
    case OpKind::matmul: return "matmul";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::gelu_approx: return "gelu_approx";
    case OpKind::softmax_lastdim: return "softmax_lastdim";
    case OpKind::layernorm_lastdim: return "layernorm_lastdim";
    case OpKind::square: return "square";
    case OpKind::sqrt: return "sqrt";
    case OpKind::abs: return "abs";
    case OpKind::l2norm: return "l2norm";
    case OpKind::concat_lastdim: return "concat_lastdim";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_add_rows: return "scatter_add_rows";
    case OpKind::scale: return "scale";
    case OpKind::broadcast_add: return "broadcast_add";
    case OpKind::reshape: return "reshape";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// TapeValue

TapeValue TapeValue::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return TapeValue(std::move(node));
}

TapeValue TapeValue::parameter(Tensor value) {
  if (!value.all_finite()) throw NumericError("parameter: non-finite value");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return TapeValue(std::move(node));
}

const Tensor& TapeValue::value() const { return node_of(*this)->value; }

const Tensor& TapeValue::gradient() const {
  auto& n = *node_of(*this);
  n.grad_buffer();
  return n.grad;
}

bool TapeValue::requires_grad() const { return node_of(*this)->requires_grad; }

OpKind TapeValue::kind() const { return node_of(*this)->kind; }

void TapeValue::zero_gradient() const {
  auto& n = *node_of(*this);
  if (n.grad_ready) n.grad.fill(0.0);
}

void TapeValue::set_value(Tensor value) const {
  auto& n = *node_of(*this);
  if (!n.is_leaf) throw ValidationError("set_value on a non-leaf TapeValue");
  if (value.shape() != n.value.shape()) {
    throw ValidationError("set_value shape " + shape_string(value.shape()) + " != " + shape_string(n.value.shape()));
  }
  n.value = std::move(value);
}

std::span<double> TapeValue::mutable_data() const {
  auto& n = *node_of(*this);
  if (!n.is_leaf) throw ValidationError("mutable_data on a non-leaf TapeValue");
  return n.value.data();
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_mode_enabled() { return t_grad_enabled; }

RowIndex make_row_index(std::vector<std::size_t> rows) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(rows));
}

// ---------------------------------------------------------------------------
// Primitives

namespace ops {

TapeValue add(const TapeValue& a, const TapeValue& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_same_shape(OpKind::add, an->value, bn->value);
  Tensor out = an->value;
  auto o = out.data();
  auto bv = bn->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return make_result(OpKind::add, std::move(out), {an, bn}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.data());
    accumulate(*self.parents[1], self.grad.data());
  });
}

TapeValue sub(const TapeValue& a, const TapeValue& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_same_shape(OpKind::sub, an->value, bn->value);
  Tensor out = an->value;
  auto o = out.data();
  auto bv = bn->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return make_result(OpKind::sub, std::move(out), {an, bn}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.data());
    Node& b = *self.parents[1];
    if (!b.requires_grad) return;
    auto buf = b.grad_buffer();
    auto dy = self.grad.data();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] -= dy[i];
  });
}

TapeValue mul(const TapeValue& a, const TapeValue& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_same_shape(OpKind::mul, an->value, bn->value);
  Tensor out = an->value;
  auto o = out.data();
  auto bv = bn->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return make_result(OpKind::mul, std::move(out), {an, bn}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    auto dy = self.grad.data();
    if (a.requires_grad) {
      auto buf = a.grad_buffer();
      auto bv = b.value.data();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dy[i] * bv[i];
    }
    if (b.requires_grad) {
      auto buf = b.grad_buffer();
      auto av = a.value.data();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dy[i] * av[i];
    }
  });
}

TapeValue div(const TapeValue& a, const TapeValue& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  require_same_shape(OpKind::div, an->value, bn->value);
  Tensor out = an->value;
  auto o = out.data();
  auto bv = bn->value.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] /= bv[i];
  return make_result(OpKind::div, std::move(out), {an, bn}, [](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    auto dy = self.grad.data();
    auto bv = b.value.data();
    if (a.requires_grad) {
      auto buf = a.grad_buffer();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += dy[i] / bv[i];
    }
    if (b.requires_grad) {
      auto buf = b.grad_buffer();
      auto y = self.value.data();
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] -= dy[i] * y[i] / bv[i];
    }
  });
}

TapeValue matmul(const TapeValue& a, const TapeValue& b) {
  const auto& an = node_of(a);
  const auto& bn = node_of(b);
  const Tensor& av = an->value;
  const Tensor& bv = bn->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0]) {
    shape_error(OpKind::matmul, {av.shape(), bv.shape()});
  }
  const auto r = av.shape()[0], k = av.shape()[1], c = bv.shape()[1];
  Tensor out(Shape{r, c});
  MutMap(out.data().data(), r, c).noalias() = ConstMap(av.data().data(), r, k) * ConstMap(bv.data().data(), k, c);
  return make_result(OpKind::matmul, std::move(out), {an, bn}, [r, k, c](Node& self) {
    Node& a = *self.parents[0];
    Node& b = *self.parents[1];
    ConstMap dy(self.grad.data().data(), r, c);
    if (a.requires_grad) {
      MutMap(a.grad_buffer().data(), r, k).noalias() += dy * ConstMap(b.value.data().data(), k, c).transpose();
    }
    if (b.requires_grad) {
      MutMap(b.grad_buffer().data(), k, c).noalias() += ConstMap(a.value.data().data(), r, k).transpose() * dy;
    }
  });
}

TapeValue sum(const TapeValue& x) {
  const auto& xn = node_of(x);
  double s = 0.0;
  for (double v : xn->value.data()) s += v;
  return make_result(OpKind::sum, Tensor::scalar(s), {xn}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g = self.grad[0];
    for (double& v : p.grad_buffer()) v += g;
  });
}

TapeValue mean(const TapeValue& x) {
  const auto& xn = node_of(x);
  double s = 0.0;
  for (double v : xn->value.data()) s += v;
  const double n = static_cast<double>(xn->value.size());
  return make_result(OpKind::mean, Tensor::scalar(s / n), {xn}, [n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g = self.grad[0] / n;
    for (double& v : p.grad_buffer()) v += g;
  });
}

TapeValue l2norm(const TapeValue& x) {
  const auto& xn = node_of(x);
  double s = 0.0;
  for (double v : xn->value.data()) s += v * v;
  return make_result(OpKind::l2norm, Tensor::scalar(std::sqrt(s)), {xn}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double norm = self.value[0];
    if (norm == 0.0) {
      p.grad_buffer();
      return;
    }
    const double g = self.grad[0] / norm;
    auto buf = p.grad_buffer();
    auto xv = p.value.data();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g * xv[i];
  });
}

TapeValue relu(const TapeValue& x) {
  return elementwise(
      OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

TapeValue tanh(const TapeValue& x) {
  return elementwise(
      OpKind::tanh, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

TapeValue gelu_approx(const TapeValue& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  // 0.5 x (1 + tanh u) == x * sigmoid(2u); the sigmoid is kept for backward.
  const auto& xn = node_of(x);
  const std::size_t n = xn->value.size();
  Tensor out(xn->value.shape(), std::vector<double>(n));
  auto sig = std::make_shared<std::vector<double>>(n);
  auto in = xn->value.data();
  auto o = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = in[i];
    const double s = 1.0 / (1.0 + std::exp(-2.0 * c * (v + k * v * v * v)));
    (*sig)[i] = s;
    o[i] = v * s;
  }
  return make_result(OpKind::gelu_approx, std::move(out), {xn}, [sig](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto xin = p.value.data();
    auto dy = self.grad.data();
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const double v = xin[i];
      const double s = (*sig)[i];
      buf[i] += dy[i] * (s + 2.0 * v * s * (1.0 - s) * c * (1.0 + 3.0 * k * v * v));
    }
  });
}

TapeValue square(const TapeValue& x) {
  return elementwise(
      OpKind::square, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

TapeValue sqrt(const TapeValue& x) {
  return elementwise(
      OpKind::sqrt, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

TapeValue abs(const TapeValue& x) {
  return elementwise(
      OpKind::abs, x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

TapeValue scale(const TapeValue& x, double factor) {
  const auto& xn = node_of(x);
  Tensor out = xn->value;
  for (double& v : out.data()) v *= factor;
  return make_result(OpKind::scale, std::move(out), {xn}, [factor](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto dy = self.grad.data();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += factor * dy[i];
  });
}

TapeValue softmax_lastdim(const TapeValue& x) {
  const auto& xn = node_of(x);
  if (xn->value.rank() == 0) shape_error(OpKind::softmax_lastdim, {xn->value.shape()}, "rank >= 1 required");
  const std::size_t rows = xn->value.rows(), cols = xn->value.cols();
  Tensor out(xn->value.shape());
  auto in = xn->value.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * cols;
    double* yr = o.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      s += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= s;
  }
  return make_result(OpKind::softmax_lastdim, std::move(out), {xn}, [rows, cols](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto y = self.value.data();
    auto dy = self.grad.data();
    // dx = y * (dy - <dy, y>) per row
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t off = r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[off + c] * y[off + c];
      for (std::size_t c = 0; c < cols; ++c) buf[off + c] += y[off + c] * (dy[off + c] - dot);
    }
  });
}

TapeValue layernorm_lastdim(const TapeValue& x, const TapeValue& gain, const TapeValue& bias) {
  const auto& xn = node_of(x);
  const auto& gn = node_of(gain);
  const auto& bn = node_of(bias);
  const Tensor& xv = xn->value;
  if (xv.rank() == 0 || gn->value.size() != xv.cols() || bn->value.size() != xv.cols() || gn->value.rank() != 1 ||
      bn->value.rank() != 1) {
    shape_error(OpKind::layernorm_lastdim, {xv.shape(), gn->value.shape(), bn->value.shape()});
  }
  const std::size_t rows = xv.rows(), cols = xv.cols();
  auto normed = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xv.shape());
  auto in = xv.data();
  auto g = gn->value.data();
  auto b = bn->value.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[off + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[off + c] - mu) * (in[off + c] - mu);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    (*inv_std)[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[off + c] - mu) * inv;
      (*normed)[off + c] = h;
      o[off + c] = h * g[c] + b[c];
    }
  }
  return make_result(OpKind::layernorm_lastdim, std::move(out), {xn, gn, bn},
                     [rows, cols, normed, inv_std](Node& self) {
                       Node& xp = *self.parents[0];
                       Node& gp = *self.parents[1];
                       Node& bp = *self.parents[2];
                       auto dy = self.grad.data();
                       const auto& h = *normed;
                       if (gp.requires_grad) {
                         auto buf = gp.grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) buf[c] += dy[r * cols + c] * h[r * cols + c];
                       }
                       if (bp.requires_grad) {
                         auto buf = bp.grad_buffer();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cols; ++c) buf[c] += dy[r * cols + c];
                       }
                       if (xp.requires_grad) {
                         auto buf = xp.grad_buffer();
                         auto g = gp.value.data();
                         const double n = static_cast<double>(cols);
                         for (std::size_t r = 0; r < rows; ++r) {
                           const std::size_t off = r * cols;
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t c = 0; c < cols; ++c) {
                             const double dh = dy[off + c] * g[c];
                             s1 += dh;
                             s2 += dh * h[off + c];
                           }
                           const double k = (*inv_std)[r] / n;
                           for (std::size_t c = 0; c < cols; ++c) {
                             const double dh = dy[off + c] * g[c];
                             buf[off + c] += k * (n * dh - s1 - h[off + c] * s2);
                           }
                         }
                       }
                     });
}

TapeValue concat_lastdim(std::span<const TapeValue> parts) {
  if (parts.empty()) throw ValidationError("concat_lastdim: no inputs");
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> widths;
  const std::size_t rows = node_of(parts[0])->value.rank() == 2 ? node_of(parts[0])->value.shape()[0] : 0;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& n = node_of(p);
    if (n->value.rank() != 2 || n->value.shape()[0] != rows) {
      shape_error(OpKind::concat_lastdim, {node_of(parts[0])->value.shape(), n->value.shape()});
    }
    nodes.push_back(n);
    widths.push_back(n->value.shape()[1]);
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  auto o = out.data();
  std::size_t col = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto in = nodes[k]->value.data();
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(in.data() + r * w, w, o.data() + r * total + col);
    col += w;
  }
  return make_result(OpKind::concat_lastdim, std::move(out), std::move(nodes), [rows, total, widths](Node& self) {
    auto dy = self.grad.data();
    std::size_t col = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = *self.parents[k];
      const std::size_t w = widths[k];
      if (p.requires_grad) {
        auto buf = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) buf[r * w + c] += dy[r * total + col + c];
      }
      col += w;
    }
  });
}

TapeValue concat_lastdim(std::initializer_list<TapeValue> parts) {
  return concat_lastdim(std::span<const TapeValue>(parts.begin(), parts.size()));
}

TapeValue gather_rows(const TapeValue& x, const RowIndex& rows) {
  const auto& xn = node_of(x);
  require_rank2(OpKind::gather_rows, xn->value);
  if (!rows || rows->empty()) shape_error(OpKind::gather_rows, {xn->value.shape()}, "empty row index");
  const std::size_t n = xn->value.shape()[0], c = xn->value.shape()[1];
  Tensor out(Shape{rows->size(), c});
  auto in = xn->value.data();
  auto o = out.data();
  for (std::size_t k = 0; k < rows->size(); ++k) {
    const std::size_t src = (*rows)[k];
    if (src >= n) shape_error(OpKind::gather_rows, {xn->value.shape()}, "row index " + std::to_string(src) + " out of range");
    std::copy_n(in.data() + src * c, c, o.data() + k * c);
  }
  return make_result(OpKind::gather_rows, std::move(out), {xn}, [rows, c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto dy = self.grad.data();
    for (std::size_t k = 0; k < rows->size(); ++k) {
      double* dst = buf.data() + (*rows)[k] * c;
      const double* src = dy.data() + k * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

TapeValue scatter_add_rows(const TapeValue& x, const RowIndex& rows, std::size_t out_rows) {
  const auto& xn = node_of(x);
  require_rank2(OpKind::scatter_add_rows, xn->value);
  if (!rows || rows->size() != xn->value.shape()[0] || out_rows == 0) {
    shape_error(OpKind::scatter_add_rows, {xn->value.shape()}, "row index length must equal input rows");
  }
  const std::size_t c = xn->value.shape()[1];
  Tensor out(Shape{out_rows, c});
  auto in = xn->value.data();
  auto o = out.data();
  for (std::size_t k = 0; k < rows->size(); ++k) {
    const std::size_t dst = (*rows)[k];
    if (dst >= out_rows) {
      shape_error(OpKind::scatter_add_rows, {xn->value.shape()}, "row index " + std::to_string(dst) + " out of range");
    }
    for (std::size_t j = 0; j < c; ++j) o[dst * c + j] += in[k * c + j];
  }
  return make_result(OpKind::scatter_add_rows, std::move(out), {xn}, [rows, c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto buf = p.grad_buffer();
    auto dy = self.grad.data();
    for (std::size_t k = 0; k < rows->size(); ++k) {
      const double* src = dy.data() + (*rows)[k] * c;
      double* dst = buf.data() + k * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

TapeValue broadcast_add(const TapeValue& x, const TapeValue& bias) {
  const auto& xn = node_of(x);
  const auto& bn = node_of(bias);
  const Tensor& xv = xn->value;
  const Tensor& bv = bn->value;
  const bool bias_ok = (bv.rank() == 1 || (bv.rank() == 2 && bv.shape()[0] == 1)) && bv.size() == xv.cols();
  if (xv.rank() != 2 || !bias_ok) shape_error(OpKind::broadcast_add, {xv.shape(), bv.shape()});
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out = xv;
  auto o = out.data();
  auto b = bv.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] += b[c];
  return make_result(OpKind::broadcast_add, std::move(out), {xn, bn}, [rows, cols](Node& self) {
    accumulate(*self.parents[0], self.grad.data());
    Node& b = *self.parents[1];
    if (!b.requires_grad) return;
    auto buf = b.grad_buffer();
    auto dy = self.grad.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) buf[c] += dy[r * cols + c];
  });
}

TapeValue reshape(const TapeValue& x, Shape shape) {
  const auto& xn = node_of(x);
  if (shape_size(shape) != xn->value.size()) shape_error(OpKind::reshape, {xn->value.shape(), shape});
  return make_result(OpKind::reshape, xn->value.reshaped(std::move(shape)), {xn},
                     [](Node& self) { accumulate(*self.parents[0], self.grad.data()); });
}

}  // namespace ops

TapeValue primitive(OpKind kind, std::span<const TapeValue> in, const PrimitiveArgs& args) {
  auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      throw ValidationError(std::string(to_string(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                            std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::add: arity(2); return ops::add(in[0], in[1]);
    case OpKind::sub: arity(2); return ops::sub(in[0], in[1]);
    case OpKind::mul: arity(2); return ops::mul(in[0], in[1]);
    case OpKind::div: arity(2); return ops::div(in[0], in[1]);
    case OpKind::matmul: arity(2); return ops::matmul(in[0], in[1]);
    case OpKind::sum: arity(1); return ops::sum(in[0]);
    case OpKind::mean: arity(1); return ops::mean(in[0]);
    case OpKind::relu: arity(1); return ops::relu(in[0]);
    case OpKind::tanh: arity(1); return ops::tanh(in[0]);
    case OpKind::gelu_approx: arity(1); return ops::gelu_approx(in[0]);
    case OpKind::softmax_lastdim: arity(1); return ops::softmax_lastdim(in[0]);
    case OpKind::layernorm_lastdim: arity(3); return ops::layernorm_lastdim(in[0], in[1], in[2]);
    case OpKind::square: arity(1); return ops::square(in[0]);
    case OpKind::sqrt: arity(1); return ops::sqrt(in[0]);
    case OpKind::abs: arity(1); return ops::abs(in[0]);
    case OpKind::l2norm: arity(1); return ops::l2norm(in[0]);
    case OpKind::concat_lastdim: return ops::concat_lastdim(in);
    case OpKind::gather_rows: arity(1); return ops::gather_rows(in[0], args.rows);
    case OpKind::scatter_add_rows: arity(1); return ops::scatter_add_rows(in[0], args.rows, args.out_rows);
    case OpKind::scale: arity(1); return ops::scale(in[0], args.factor);
    case OpKind::broadcast_add: arity(2); return ops::broadcast_add(in[0], in[1]);
    case OpKind::reshape: arity(1); return ops::reshape(in[0], args.shape);
    case OpKind::leaf: break;
  }
  throw ValidationError("primitive: leaf is not an operation");
}

// ---------------------------------------------------------------------------
// Reverse pass

void backward(const TapeValue& root) {
  const NodePtr& rn = node_of(root);
  if (rn->value.size() != 1) {
    throw ValidationError("backward: root must be scalar, got shape " + shape_string(rn->value.shape()));
  }
  if (!rn->requires_grad) return;
  if (rn->is_leaf) {
    rn->grad_buffer()[0] += 1.0;
    return;
  }

  // Post-order DFS: every node appears after all of its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(rn.get(), 0);
  visited.insert(rn.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->is_leaf) continue;
    if (n->grad_ready) {
      n->grad.fill(0.0);
    } else {
      n->grad_buffer();
    }
  }
  rn->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// ParamTree

TapeValue& ParamTree::add(std::string name, Tensor init) {
  if (contains(name)) throw ValidationError("duplicate parameter block '" + name + "'");
  entries_.push_back({std::move(name), TapeValue::parameter(std::move(init))});
  return entries_.back().value;
}

bool ParamTree::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

std::size_t ParamTree::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw ValidationError("unknown parameter block '" + std::string(name) + "'");
}

const TapeValue& ParamTree::at(std::string_view name) const { return entries_[index_of(name)].value; }

void ParamTree::set_last_layer(std::string name) {
  index_of(name);
  last_layer_ = std::move(name);
}

void ParamTree::zero_gradients() const {
  for (const auto& e : entries_) e.value.zero_gradient();
}

std::vector<Tensor> ParamTree::gradients() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value.gradient());
  return out;
}

std::vector<Tensor> ParamTree::values() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value.value());
  return out;
}

void ParamTree::set_values(std::span<const Tensor> values) const {
  if (values.size() != entries_.size()) throw ValidationError("set_values: block count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) entries_[i].value.set_value(values[i]);
}

std::size_t ParamTree::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.value().size();
  return n;
}

ParamTree ParamTree::clone() const {
  ParamTree out;
  for (const auto& e : entries_) out.add(e.name, e.value.value());
  out.last_layer_ = last_layer_;
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

double probe(const std::function<double(const ParamTree&)>& loss_fn, const ParamTree& params, std::size_t block,
             std::size_t index) {
  const double v = loss_fn(params);
  if (!std::isfinite(v)) {
    throw NumericError("finite difference: non-finite loss at " + params[block].name + "[" +
                       std::to_string(index) + "]");
  }
  return v;
}

}  // namespace

std::vector<double> finite_difference_at(const std::function<double(const ParamTree&)>& loss_fn,
                                         const ParamTree& params, std::span<const Coordinate> coords,
                                         double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("finite difference: epsilon must be positive");
  std::vector<double> out;
  out.reserve(coords.size());
  for (const auto& c : coords) {
    if (c.block >= params.size()) throw ValidationError("finite difference: block index out of range");
    auto data = params[c.block].value.mutable_data();
    if (c.index >= data.size()) throw ValidationError("finite difference: coordinate out of range");
    const double saved = data[c.index];
    double plus = 0.0;
    double minus = 0.0;
    try {
      data[c.index] = saved + epsilon;
      plus = probe(loss_fn, params, c.block, c.index);
      data[c.index] = saved - epsilon;
      minus = probe(loss_fn, params, c.block, c.index);
    } catch (...) {
      data[c.index] = saved;
      throw;
    }
    data[c.index] = saved;
    out.push_back((plus - minus) / (2.0 * epsilon));
  }
  return out;
}

std::vector<Tensor> finite_difference_gradient(const std::function<double(const ParamTree&)>& loss_fn,
                                               const ParamTree& params, double epsilon) {
  std::vector<Tensor> out;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor g(params[b].value.shape());
    std::vector<Coordinate> coords;
    for (std::size_t i = 0; i < g.size(); ++i) coords.push_back({b, i});
    auto vals = finite_difference_at(loss_fn, params, coords, epsilon);
    std::copy(vals.begin(), vals.end(), g.data().begin());
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace remul

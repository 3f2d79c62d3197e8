#include "remul/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "remul/errors.hpp"

namespace remul {

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::mlp: return "mlp";
    case ModelFamily::gnn: return "gnn";
    case ModelFamily::transformer: return "transformer";
    case ModelFamily::egnn: return "egnn";
  }
  return "unknown";
}

ModelFamily parse_model_family(std::string_view name) {
  if (name == "mlp") return ModelFamily::mlp;
  if (name == "gnn") return ModelFamily::gnn;
  if (name == "transformer") return ModelFamily::transformer;
  if (name == "egnn") return ModelFamily::egnn;
  throw ValidationError("unknown model family '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (hidden_dim == 0 || layers == 0) throw ValidationError("hidden_dim and layers must be positive");
  if (family == ModelFamily::transformer && (heads == 0 || hidden_dim % heads != 0)) {
    throw ValidationError("heads must divide hidden_dim");
  }
  if (family == ModelFamily::mlp && node_count == 0) throw ValidationError("mlp needs a positive node_count");
}

ModelConfig default_model_config(ModelFamily family) {
  ModelConfig c;
  c.family = family;
  c.residual_output = family != ModelFamily::mlp;
  return c;
}

namespace {

using namespace ops;

// ---------------------------------------------------------------------------
// Parameter construction

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  void weight(ParamTree& tree, const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w(Shape{rows, cols});
    for (double& v : w.data()) v = u(rng_);
    tree.add(name, std::move(w));
  }

  void linear(ParamTree& tree, const std::string& prefix, std::size_t in, std::size_t out) {
    weight(tree, prefix + ".weight", in, out, in);
    tree.add(prefix + ".bias", Tensor(Shape{out}, 0.0));
  }

  void layernorm(ParamTree& tree, const std::string& prefix, std::size_t width) {
    tree.add(prefix + ".gain", Tensor(Shape{width}, 1.0));
    tree.add(prefix + ".bias", Tensor(Shape{width}, 0.0));
  }

  // First edge layer acting on (h_i, h_j, d_ij^2), stored split by input part.
  void edge_input(ParamTree& tree, const std::string& prefix, std::size_t hidden) {
    const std::size_t fan_in = 2 * hidden + 1;
    weight(tree, prefix + ".w_src", hidden, hidden, fan_in);
    weight(tree, prefix + ".w_dst", hidden, hidden, fan_in);
    weight(tree, prefix + ".w_dist", 1, hidden, fan_in);
    tree.add(prefix + ".bias", Tensor(Shape{hidden}, 0.0));
  }

 private:
  Rng rng_;
};

std::string block(std::string_view kind, std::size_t l) { return std::string(kind) + std::to_string(l); }

ParamTree init_mlp(const ModelConfig& c, Initializer& init) {
  ParamTree tree;
  const std::size_t in = c.node_count * c.input_width();
  const std::size_t out = 3 * c.node_count;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t fi = l == 0 ? in : c.hidden_dim;
    const std::size_t fo = l + 1 == c.layers ? out : c.hidden_dim;
    init.linear(tree, block("layer", l), fi, fo);
  }
  tree.set_last_layer(block("layer", c.layers - 1) + ".weight");
  return tree;
}

ParamTree init_gnn(const ModelConfig& c, Initializer& init) {
  ParamTree tree;
  const std::size_t h = c.hidden_dim;
  init.linear(tree, "embed", c.input_width(), h);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = block("mp", l);
    init.edge_input(tree, p + ".edge_in", h);
    init.linear(tree, p + ".edge_out", h, h);
    init.linear(tree, p + ".node_in", 2 * h, h);
    init.linear(tree, p + ".node_out", h, h);
  }
  init.linear(tree, "head", h, 3);
  tree.set_last_layer("head.weight");
  return tree;
}

ParamTree init_egnn(const ModelConfig& c, Initializer& init) {
  ParamTree tree;
  const std::size_t h = c.hidden_dim;
  init.linear(tree, "embed", c.scalar_width + 1, h);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = block("mp", l);
    init.edge_input(tree, p + ".edge_in", h);
    init.linear(tree, p + ".edge_out", h, h);
    init.linear(tree, p + ".vel_hidden", h, h);
    init.linear(tree, p + ".vel_out", h, 1);
    init.linear(tree, p + ".coord_hidden", h, h);
    init.linear(tree, p + ".coord_out", h, 1);
    if (l + 1 < c.layers) {
      init.linear(tree, p + ".node_in", 2 * h, h);
      init.linear(tree, p + ".node_out", h, h);
    }
  }
  tree.set_last_layer(block("mp", c.layers - 1) + ".coord_out.weight");
  return tree;
}

ParamTree init_transformer(const ModelConfig& c, Initializer& init) {
  ParamTree tree;
  const std::size_t h = c.hidden_dim;
  const std::size_t dh = h / c.heads;
  init.linear(tree, "embed", c.input_width(), h);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = block("blk", l);
    init.layernorm(tree, p + ".ln1", h);
    for (std::size_t k = 0; k < c.heads; ++k) {
      init.weight(tree, p + ".attn.q" + std::to_string(k), h, dh, h);
      init.weight(tree, p + ".attn.k" + std::to_string(k), h, dh, h);
      init.weight(tree, p + ".attn.v" + std::to_string(k), h, dh, h);
    }
    init.linear(tree, p + ".attn.out", h, h);
    init.layernorm(tree, p + ".ln2", h);
    init.linear(tree, p + ".mlp.fc1", h, 2 * h);
    init.linear(tree, p + ".mlp.fc2", 2 * h, h);
  }
  init.layernorm(tree, "final_ln", h);
  init.linear(tree, "head", h, 3);
  tree.set_last_layer("head.weight");
  return tree;
}

// ---------------------------------------------------------------------------
// Forward building blocks

TapeValue linear(const ParamTree& p, const std::string& prefix, const TapeValue& x) {
  return broadcast_add(matmul(x, p.at(prefix + ".weight")), p.at(prefix + ".bias"));
}

TapeValue layer_norm(const ParamTree& p, const std::string& prefix, const TapeValue& x) {
  return layernorm_lastdim(x, p.at(prefix + ".gain"), p.at(prefix + ".bias"));
}

TapeValue constant_ones(std::size_t rows, std::size_t cols) { return TapeValue::constant(Tensor(Shape{rows, cols}, 1.0)); }

// Row-wise sum of squares as a column: (R x C) -> (R x 1).
TapeValue row_sq_norm(const TapeValue& x) { return matmul(square(x), constant_ones(x.shape()[1], 1)); }

// Broadcast a column across `cols` columns: (R x 1) -> (R x cols).
TapeValue widen(const TapeValue& col, std::size_t cols) { return matmul(col, constant_ones(1, cols)); }

template <class F>
auto in_layer(std::size_t layer, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError("layer " + std::to_string(layer) + ": " + e.what());
  }
}

struct Edges {
  RowIndex receiver;  // row i of each ordered pair (i, j)
  RowIndex sender;    // row j
  std::size_t count = 0;
};

// Ordered pairs within each item, item-major then i then j.
Edges item_edges(const Batch& b, bool self_loops) {
  std::vector<std::size_t> recv, send;
  for (std::size_t it = 0; it < b.items; ++it) {
    const std::size_t base = it * b.nodes;
    for (std::size_t i = 0; i < b.nodes; ++i) {
      for (std::size_t j = 0; j < b.nodes; ++j) {
        if (i == j && !self_loops) continue;
        recv.push_back(base + i);
        send.push_back(base + j);
      }
    }
  }
  Edges e;
  e.count = recv.size();
  e.receiver = make_row_index(std::move(recv));
  e.sender = make_row_index(std::move(send));
  return e;
}

TapeValue node_features(const Batch& b) {
  std::vector<TapeValue> parts{TapeValue::constant(b.positions), TapeValue::constant(b.velocities)};
  if (b.scalar_width) parts.push_back(TapeValue::constant(b.scalars));
  return concat_lastdim(parts);
}

// phi_e(h_i, h_j, d2) = gelu(edge_out(gelu(edge_in(h_i, h_j, d2)))).
TapeValue edge_messages(const ParamTree& p, const std::string& prefix, const TapeValue& h, const Edges& e,
                        const TapeValue& dist2) {
  const TapeValue src = matmul(h, p.at(prefix + ".edge_in.w_src"));
  const TapeValue dst = matmul(h, p.at(prefix + ".edge_in.w_dst"));
  TapeValue pre = add(gather_rows(src, e.receiver), gather_rows(dst, e.sender));
  pre = add(pre, matmul(dist2, p.at(prefix + ".edge_in.w_dist")));
  pre = broadcast_add(pre, p.at(prefix + ".edge_in.bias"));
  return gelu_approx(linear(p, prefix + ".edge_out", gelu_approx(pre)));
}

// Mean over the N - 1 neighbours of each node.
TapeValue aggregate(const TapeValue& per_edge, const Edges& e, const Batch& b) {
  if (b.nodes == 1) return TapeValue::constant(Tensor(Shape{b.rows(), per_edge.shape()[1]}, 0.0));
  return scale(scatter_add_rows(per_edge, e.receiver, b.rows()), 1.0 / static_cast<double>(b.nodes - 1));
}

TapeValue node_update(const ParamTree& p, const std::string& prefix, const TapeValue& h, const TapeValue& agg) {
  const TapeValue upd = linear(p, prefix + ".node_out", gelu_approx(linear(p, prefix + ".node_in", concat_lastdim({h, agg}))));
  return add(h, upd);
}

TapeValue with_residual(const ModelConfig& c, const Batch& b, const TapeValue& dx) {
  return c.residual_output ? add(TapeValue::constant(b.positions), dx) : dx;
}

TapeValue forward_mlp(const ModelConfig& c, const ParamTree& p, const Batch& b) {
  if (b.nodes != c.node_count) {
    throw ValidationError("mlp expects " + std::to_string(c.node_count) + " nodes, got " + std::to_string(b.nodes));
  }
  TapeValue x = reshape(node_features(b), Shape{b.items, b.nodes * c.input_width()});
  for (std::size_t l = 0; l < c.layers; ++l) {
    x = in_layer(l, [&] {
      TapeValue y = linear(p, block("layer", l), x);
      return l + 1 < c.layers ? gelu_approx(y) : y;
    });
  }
  return with_residual(c, b, reshape(x, Shape{b.rows(), 3}));
}

TapeValue forward_gnn(const ModelConfig& c, const ParamTree& p, const Batch& b) {
  const Edges e = item_edges(b, false);
  TapeValue h = in_layer(0, [&] { return linear(p, "embed", node_features(b)); });
  if (e.count == 0) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      const TapeValue agg = aggregate(h, e, b);
      h = in_layer(l, [&] { return node_update(p, block("mp", l), h, agg); });
    }
  } else {
    const TapeValue pos = TapeValue::constant(b.positions);
    const TapeValue dist2 = row_sq_norm(sub(gather_rows(pos, e.receiver), gather_rows(pos, e.sender)));
    for (std::size_t l = 0; l < c.layers; ++l) {
      h = in_layer(l, [&] {
        const std::string prefix = block("mp", l);
        const TapeValue m = edge_messages(p, prefix, h, e, dist2);
        return node_update(p, prefix, h, aggregate(m, e, b));
      });
    }
  }
  return with_residual(c, b, in_layer(c.layers, [&] { return linear(p, "head", h); }));
}

TapeValue forward_egnn(const ModelConfig& c, const ParamTree& p, const Batch& b) {
  const Edges e = item_edges(b, false);
  const TapeValue vel = TapeValue::constant(b.velocities);
  TapeValue x = TapeValue::constant(b.positions);
  TapeValue h = in_layer(0, [&] {
    std::vector<TapeValue> inv;
    if (b.scalar_width) inv.push_back(TapeValue::constant(b.scalars));
    inv.push_back(row_sq_norm(vel));
    return linear(p, "embed", concat_lastdim(inv));
  });
  for (std::size_t l = 0; l < c.layers; ++l) {
    in_layer(l, [&] {
      const std::string prefix = block("mp", l);
      const TapeValue vel_gate = linear(p, prefix + ".vel_out", gelu_approx(linear(p, prefix + ".vel_hidden", h)));
      TapeValue shift = mul(widen(vel_gate, 3), vel);
      TapeValue m;
      if (e.count) {
        const TapeValue diff = sub(gather_rows(x, e.receiver), gather_rows(x, e.sender));
        m = edge_messages(p, prefix, h, e, row_sq_norm(diff));
        const TapeValue w = linear(p, prefix + ".coord_out", gelu_approx(linear(p, prefix + ".coord_hidden", m)));
        shift = add(shift, aggregate(mul(diff, widen(w, 3)), e, b));
      } else {
        m = TapeValue::constant(Tensor(Shape{1, c.hidden_dim}, 0.0));
      }
      x = add(x, shift);
      if (l + 1 < c.layers) {
        const TapeValue agg = e.count ? aggregate(m, e, b) : aggregate(h, e, b);
        h = node_update(p, prefix, h, agg);
      }
      return 0;
    });
  }
  return x;
}

TapeValue attention(const ModelConfig& c, const ParamTree& p, const std::string& prefix, const TapeValue& x,
                    const Edges& e, const Batch& b) {
  const std::size_t dh = c.hidden_dim / c.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const TapeValue ones_dh = constant_ones(dh, 1);
  std::vector<TapeValue> heads;
  heads.reserve(c.heads);
  for (std::size_t k = 0; k < c.heads; ++k) {
    const std::string hk = std::to_string(k);
    const TapeValue q = matmul(x, p.at(prefix + ".q" + hk));
    const TapeValue key = matmul(x, p.at(prefix + ".k" + hk));
    const TapeValue v = matmul(x, p.at(prefix + ".v" + hk));
    TapeValue scores = scale(matmul(mul(gather_rows(q, e.receiver), gather_rows(key, e.sender)), ones_dh), inv_sqrt);
    scores = reshape(softmax_lastdim(reshape(scores, Shape{b.rows(), b.nodes})), Shape{e.count, 1});
    const TapeValue weighted = mul(widen(scores, dh), gather_rows(v, e.sender));
    heads.push_back(scatter_add_rows(weighted, e.receiver, b.rows()));
  }
  return linear(p, prefix + ".out", concat_lastdim(heads));
}

TapeValue forward_transformer(const ModelConfig& c, const ParamTree& p, const Batch& b) {
  const Edges e = item_edges(b, true);
  TapeValue x = in_layer(0, [&] { return linear(p, "embed", node_features(b)); });
  for (std::size_t l = 0; l < c.layers; ++l) {
    x = in_layer(l, [&] {
      const std::string prefix = block("blk", l);
      TapeValue y = add(x, attention(c, p, prefix + ".attn", layer_norm(p, prefix + ".ln1", x), e, b));
      const TapeValue hidden = gelu_approx(linear(p, prefix + ".mlp.fc1", layer_norm(p, prefix + ".ln2", y)));
      return add(y, linear(p, prefix + ".mlp.fc2", hidden));
    });
  }
  return with_residual(c, b, in_layer(c.layers, [&] { return linear(p, "head", layer_norm(p, "final_ln", x)); }));
}

}  // namespace

ParamTree init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Initializer init(seed);
  switch (config.family) {
    case ModelFamily::mlp: return init_mlp(config, init);
    case ModelFamily::gnn: return init_gnn(config, init);
    case ModelFamily::transformer: return init_transformer(config, init);
    case ModelFamily::egnn: return init_egnn(config, init);
  }
  throw ValidationError("unknown model family");
}

TapeValue forward(const ModelConfig& config, const ParamTree& params, const Batch& batch) {
  config.validate();
  if (batch.scalar_width != config.scalar_width) {
    throw ValidationError("model expects scalar width " + std::to_string(config.scalar_width) + ", batch has " +
                          std::to_string(batch.scalar_width));
  }
  switch (config.family) {
    case ModelFamily::mlp: return forward_mlp(config, params, batch);
    case ModelFamily::gnn: return forward_gnn(config, params, batch);
    case ModelFamily::transformer: return forward_transformer(config, params, batch);
    case ModelFamily::egnn: return forward_egnn(config, params, batch);
  }
  throw ValidationError("unknown model family");
}

namespace {

Tensor row_slice(const Tensor& t, std::size_t first, std::size_t count) {
  const std::size_t cols = t.cols();
  auto d = t.data();
  return Tensor(Shape{count, cols}, std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(first * cols),
                                                        d.begin() + static_cast<std::ptrdiff_t>((first + count) * cols)));
}

Batch item_slice(const Batch& b, std::size_t first, std::size_t count) {
  Batch s;
  s.items = count;
  s.nodes = b.nodes;
  s.scalar_width = b.scalar_width;
  s.positions = row_slice(b.positions, first * b.nodes, count * b.nodes);
  s.velocities = row_slice(b.velocities, first * b.nodes, count * b.nodes);
  s.targets = row_slice(b.targets, first * b.nodes, count * b.nodes);
  if (b.scalar_width) s.scalars = row_slice(b.scalars, first * b.nodes, count * b.nodes);
  return s;
}

// Largest intermediate per item, in doubles. Inference walks the batch in
// chunks that keep these inside the L2 cache.
std::size_t footprint(const ModelConfig& c, std::size_t nodes) {
  switch (c.family) {
    case ModelFamily::mlp: return nodes * 6 + c.hidden_dim;
    case ModelFamily::transformer: return nodes * std::max(nodes * c.heads, c.hidden_dim * 3);
    case ModelFamily::gnn:
    case ModelFamily::egnn: return nodes * std::max<std::size_t>(nodes, 2) * c.hidden_dim;
  }
  return nodes * c.hidden_dim;
}

constexpr std::size_t kChunkBudget = std::size_t{1} << 13;

}  // namespace

Tensor predict(const ModelConfig& config, const ParamTree& params, const Batch& batch) {
  NoGradGuard guard;
  const std::size_t chunk = std::max<std::size_t>(1, kChunkBudget / std::max<std::size_t>(1, footprint(config, batch.nodes)));
  if (batch.items <= chunk) return forward(config, params, batch).value();
  std::vector<double> out;
  out.reserve(batch.rows() * 3);
  for (std::size_t first = 0; first < batch.items; first += chunk) {
    const Tensor y = forward(config, params, item_slice(batch, first, std::min(chunk, batch.items - first))).value();
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return Tensor(Shape{batch.rows(), 3}, std::move(out));
}

DifferentiableModel bind_model(const ModelConfig& config, const ParamTree& params) {
  return [config, params](const Batch& b) { return forward(config, params, b); };
}

Predictor bind_predictor(const ModelConfig& config, const ParamTree& params) {
  return [config, params](const Batch& b) { return predict(config, params, b); };
}

}  // namespace remul

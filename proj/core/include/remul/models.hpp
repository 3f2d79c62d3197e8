#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "remul/autodiff.hpp"
#include "remul/point_sample.hpp"

namespace remul {

enum class ModelFamily { mlp, gnn, transformer, egnn };

std::string_view to_string(ModelFamily family);
ModelFamily parse_model_family(std::string_view name);

/// Shape of a predictor. Node features are positions | velocities | scalars,
/// so the per-node input width is 6 + scalar_width.
struct ModelConfig {
  ModelFamily family = ModelFamily::gnn;
  std::size_t hidden_dim = 64;
  std::size_t layers = 4;
  std::size_t heads = 4;         // transformer only
  std::size_t node_count = 4;    // mlp only; the flattened input fixes N
  std::size_t scalar_width = 1;
  bool residual_output = true;   // add input positions to the head output

  std::size_t input_width() const { return 6 + scalar_width; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Desk-scale defaults: hidden 64, 4 layers, 4 heads. Residual output for every
// family except mlp.
ModelConfig default_model_config(ModelFamily family);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, layer-norm gains 1.
/// The final output projection is tagged as the last layer.
ParamTree init_params(const ModelConfig& config, std::uint64_t seed);

/// Per-node position predictions, (items * nodes) x 3.
///
/// mlp         flattened node features through gelu hidden layers to 3N outputs.
/// gnn         fully connected message passing on (h_i, h_j, |x_i - x_j|^2) with
///             mean aggregation and residual feature updates; linear head to dx.
/// transformer pre-layernorm blocks of multi-head self-attention over the
///             nodes of each item plus a gelu MLP; linear head to dx.
/// egnn        E(n)-equivariant layers on invariant features (scalars, |v|^2):
///             x_i += sum_j (x_i - x_j) phi_x(m_ij) / (N - 1) + phi_v(h_i) v_i.
///             Rotation-equivariant by construction.
TapeValue forward(const ModelConfig& config, const ParamTree& params, const Batch& batch);

/// forward() without recording a graph.
Tensor predict(const ModelConfig& config, const ParamTree& params, const Batch& batch);

using DifferentiableModel = std::function<TapeValue(const Batch&)>;
using Predictor = std::function<Tensor(const Batch&)>;

// The returned callables share the parameter leaves of `params`.
DifferentiableModel bind_model(const ModelConfig& config, const ParamTree& params);
Predictor bind_predictor(const ModelConfig& config, const ParamTree& params);

}  // namespace remul

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "remul/adam.hpp"
#include "remul/errors.hpp"
#include "remul/gradnorm.hpp"
#include "remul/models.hpp"
#include "remul/objectives.hpp"

namespace remul {

/// standard  L_obj only (beta = 0)
/// constant  fixed alpha0 L_obj + beta0 L_equi
/// gradual   alpha, beta adapted by GradNorm from last-layer gradient norms
/// augment   rotated inputs only: (alpha, beta) = (0, 1)
enum class TrainMode { standard, constant, gradual, augment };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct GradNormConfig {
  double eta = 0.025;
  double gamma = 1.5;
  std::size_t stride = 1;
  bool renormalize = true;

  friend bool operator==(const GradNormConfig&, const GradNormConfig&) = default;
};

/// Group sampler used by the equivariance loss: "haar" (all of SO(3)),
/// "range" (angle-restricted) or "identity".
///
/// schedule "fresh" draws group_samples new rotations per item every step.
/// "fixed" draws a pool of group_samples rotations per training item once,
/// before the first step, and reuses it whenever the item is batched.
struct RotationConfig {
  std::string sampler = "haar";
  double min_deg = -180.0;
  double max_deg = 180.0;
  std::string schedule = "fresh";

  RotationSampler make_sampler() const;
  friend bool operator==(const RotationConfig&, const RotationConfig&) = default;
};

struct TrainConfig {
  TrainMode mode = TrainMode::constant;
  double alpha0 = 1.0;
  double beta0 = 1.0;
  MetricKind metric = MetricKind::l2_squared_mean;
  std::size_t group_samples = 1;
  double lr = 3e-4;
  std::size_t batch_size = 64;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  ModelConfig model = default_model_config(ModelFamily::gnn);
  GradNormConfig gradnorm;
  RotationConfig rotation;

  void validate() const;
  // (alpha, beta) actually applied at the first step, honouring the mode.
  std::pair<double, double> effective_weights() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RunLogRow {
  std::size_t step = 0;
  double l_obj = 0.0;
  double l_equi = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double grad_norm_obj = 0.0;   // |grad_W L_obj|, gradual mode only
  double grad_norm_equi = 0.0;  // |grad_W L_equi|, gradual mode only
  double wall_ms = 0.0;
};

struct RunLog {
  std::vector<RunLogRow> rows;

  static std::string csv_header();
  void write_csv(std::ostream& out) const;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t step, std::optional<RunLogRow> last_row, const std::string& what);
  std::size_t step() const { return step_; }
  const std::optional<RunLogRow>& last_finite_row() const { return last_row_; }

 private:
  std::size_t step_;
  std::optional<RunLogRow> last_row_;
};

struct TrainHooks {
  // Replaces the configured group sampler (e.g. a frozen rotation set).
  std::optional<RotationSampler> sampler;
  std::function<void(const RunLogRow&)> on_step;
};

struct StepLosses {
  TapeValue l_obj;
  TapeValue l_equi;  // empty in standard mode
};

/// Graphs for one step on already-centered items. In augment mode the clean
/// objective is evaluated without gradients, for logging only.
StepLosses build_step_losses(const TrainConfig& config, const ParamTree& params,
                             std::span<const PointSample> items, RotationSampler& sampler, Rng& rng);

struct StepGradients {
  double l_obj = 0.0;
  double l_equi = 0.0;
  std::vector<Tensor> combined;      // what the optimizer sees
  std::vector<Tensor> objective;     // gradual mode only
  std::vector<Tensor> equivariance;  // gradual mode only
};

/// Backward pass(es) for the configured mode. Gradual mode runs one backward
/// per loss and combines them with (alpha, beta); the other modes run a
/// single backward. Leaves parameter gradients zeroed.
StepGradients compute_step_gradients(const TrainConfig& config, const ParamTree& params, const StepLosses& losses,
                                     double alpha, double beta);

/// Step-at-a-time training loop. Items are centered on construction.
///
/// RNG streams are derived from config.seed: parameters, batch order, and
/// group samples each get their own stream, so modes that skip the
/// equivariance loss still see identical batches.
class Trainer {
 public:
  Trainer(TrainConfig config, std::span<const PointSample> train_set, TrainHooks hooks = {});

  RunLogRow step();

  const ParamTree& params() const { return params_; }
  const PenaltyState& penalty() const { return penalty_; }
  const TrainConfig& config() const { return config_; }
  std::size_t steps_done() const { return steps_done_; }
  const std::vector<PointSample>& train_set() const { return train_; }

  // Batch indices the next step() will use; does not advance the stream.
  std::vector<std::size_t> peek_batch() const;

 private:
  std::vector<std::size_t> next_batch();
  RunLogRow step_impl(const std::vector<PointSample>& items, RotationSampler& sampler);

  TrainConfig config_;
  std::vector<PointSample> train_;
  TrainHooks hooks_;
  ParamTree params_;
  AdamState adam_;
  PenaltyState penalty_;
  RotationSampler sampler_;
  std::vector<Rotation> pool_;  // item-major, fixed schedule only
  Rng batch_rng_;
  Rng rotation_rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t steps_done_ = 0;
  std::optional<RunLogRow> last_row_;
};

struct TrainResult {
  ParamTree params;       // after the final step
  ParamTree best_params;  // lowest validation MSE seen (final params if no val set)
  double best_val_mse = 0.0;
  std::size_t best_step = 0;
  RunLog log;
  std::vector<std::pair<std::size_t, double>> val_history;
};

/// Runs config.steps steps. Validation MSE (clean inputs, squared error) is
/// checked every eval_every steps and after the last one.
TrainResult train(const TrainConfig& config, std::span<const PointSample> train_set,
                  std::span<const PointSample> val_set, TrainHooks hooks = {});

/// Mean metric of the predictions over the dataset, without gradients.
/// Items are centered first.
double evaluate(const ModelConfig& model, const ParamTree& params, std::span<const PointSample> dataset,
                MetricKind metric = MetricKind::l2_squared_mean);
double evaluate(const Predictor& predictor, std::span<const PointSample> dataset,
                MetricKind metric = MetricKind::l2_squared_mean);

std::vector<PointSample> centered(std::span<const PointSample> dataset);

}  // namespace remul

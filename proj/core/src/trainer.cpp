#include "remul/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "remul/format.hpp"

namespace remul {

namespace {

constexpr std::size_t kEvalChunk = 256;

double norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

std::string row_string(const RunLogRow& r) {
  return std::to_string(r.step) + ',' + format_double(r.l_obj) + ',' + format_double(r.l_equi) + ',' +
         format_double(r.alpha) + ',' + format_double(r.beta) + ',' + format_double(r.grad_norm_obj) + ',' +
         format_double(r.grad_norm_equi) + ',' + format_double(r.wall_ms);
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::standard: return "standard";
    case TrainMode::constant: return "constant";
    case TrainMode::gradual: return "gradual";
    case TrainMode::augment: return "augment";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "standard") return TrainMode::standard;
  if (name == "constant") return TrainMode::constant;
  if (name == "gradual") return TrainMode::gradual;
  if (name == "augment") return TrainMode::augment;
  throw ValidationError("unknown mode '" + std::string(name) + "' (expected standard|constant|gradual|augment)");
}

RotationSampler RotationConfig::make_sampler() const {
  if (sampler == "haar") return RotationSampler::haar();
  if (sampler == "range") return RotationSampler::angle_range(min_deg, max_deg);
  if (sampler == "identity") return RotationSampler::identity();
  throw ValidationError("unknown rotation sampler '" + sampler + "' (expected haar|range|identity)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(alpha0 >= 0.0) || !(beta0 >= 0.0) || !std::isfinite(alpha0) || !std::isfinite(beta0)) {
    throw ValidationError("alpha0 and beta0 must be finite and non-negative");
  }
  if (group_samples == 0) throw ValidationError("group_samples must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be positive");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (eval_every == 0) throw ValidationError("eval_every must be >= 1");
  if (gradnorm.stride == 0) throw ValidationError("gradnorm.stride must be >= 1");
  if (!(gradnorm.eta >= 0.0) || !std::isfinite(gradnorm.eta)) throw ValidationError("gradnorm.eta must be >= 0");
  if (!std::isfinite(gradnorm.gamma)) throw ValidationError("gradnorm.gamma must be finite");
  if (mode == TrainMode::gradual && alpha0 + beta0 <= 0.0) {
    throw ValidationError("gradual mode needs alpha0 + beta0 > 0");
  }
  (void)rotation.make_sampler();
  if (rotation.schedule != "fresh" && rotation.schedule != "fixed") {
    throw ValidationError("unknown rotation schedule '" + rotation.schedule + "' (expected fresh|fixed)");
  }
}

std::pair<double, double> TrainConfig::effective_weights() const {
  switch (mode) {
    case TrainMode::standard: return {1.0, 0.0};
    case TrainMode::augment: return {0.0, 1.0};
    case TrainMode::constant:
    case TrainMode::gradual: break;
  }
  return {alpha0, beta0};
}

std::string RunLog::csv_header() { return "step,l_obj,l_equi,alpha,beta,grad_norm_obj,grad_norm_equi,wall_ms"; }

void RunLog::write_csv(std::ostream& out) const {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << row_string(r) << '\n';
}

TrainingDiverged::TrainingDiverged(std::size_t step, std::optional<RunLogRow> last_row, const std::string& what)
    : NumericError("training diverged at step " + std::to_string(step) + ": " + what +
                   (last_row ? " (last finite row: " + row_string(*last_row) + ")" : std::string())),
      step_(step),
      last_row_(std::move(last_row)) {}

std::vector<PointSample> centered(std::span<const PointSample> dataset) {
  std::vector<PointSample> out;
  out.reserve(dataset.size());
  for (const auto& x : dataset) out.push_back(center(x).first);
  return out;
}

Trainer::Trainer(TrainConfig config, std::span<const PointSample> train_set, TrainHooks hooks)
    : config_(std::move(config)), train_(centered(train_set)), hooks_(std::move(hooks)) {
  config_.validate();
  if (train_.empty()) throw ValidationError("training set is empty");
  for (const auto& x : train_) {
    if (x.scalar_width != config_.model.scalar_width) {
      throw ValidationError("training sample scalar width " + std::to_string(x.scalar_width) +
                            " does not match model.scalar_width " + std::to_string(config_.model.scalar_width));
    }
    if (config_.model.family == ModelFamily::mlp && x.node_count() != config_.model.node_count) {
      throw ValidationError("mlp expects " + std::to_string(config_.model.node_count) + " nodes per sample");
    }
  }
  params_ = init_params(config_.model, mix_seed(config_.seed, 1));
  adam_ = AdamState::for_params(params_);
  const auto [a, b] = config_.effective_weights();
  penalty_.alpha = a;
  penalty_.beta = b;
  penalty_.eta = config_.gradnorm.eta;
  penalty_.gamma = config_.gradnorm.gamma;
  penalty_.renormalize = config_.gradnorm.renormalize;
  sampler_ = hooks_.sampler ? *hooks_.sampler : config_.rotation.make_sampler();
  batch_rng_.seed(mix_seed(config_.seed, 2));
  rotation_rng_.seed(mix_seed(config_.seed, 3));
  if (config_.rotation.schedule == "fixed" && config_.mode != TrainMode::standard) {
    pool_.reserve(train_.size() * config_.group_samples);
    for (std::size_t i = 0; i < train_.size() * config_.group_samples; ++i) pool_.push_back(sampler_.draw(rotation_rng_));
  }
  order_.resize(train_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();  // forces a shuffle on the first draw
}

namespace {

std::vector<std::size_t> draw_batch(std::size_t batch_size, Rng& rng, std::vector<std::size_t>& order,
                                    std::size_t& cursor) {
  std::vector<std::size_t> idx;
  idx.reserve(batch_size);
  while (idx.size() < batch_size) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    idx.push_back(order[cursor++]);
  }
  return idx;
}

}  // namespace

std::vector<std::size_t> Trainer::next_batch() { return draw_batch(config_.batch_size, batch_rng_, order_, cursor_); }

std::vector<std::size_t> Trainer::peek_batch() const {
  Rng rng = batch_rng_;
  auto order = order_;
  std::size_t cursor = cursor_;
  return draw_batch(config_.batch_size, rng, order, cursor);
}

RunLogRow Trainer::step() {
  const auto idx = next_batch();
  std::vector<PointSample> items;
  items.reserve(idx.size());
  for (auto i : idx) items.push_back(train_[i]);
  std::optional<RotationSampler> from_pool;
  if (!pool_.empty()) {
    const std::size_t s = config_.group_samples;
    std::vector<Rotation> draws;
    draws.reserve(idx.size() * s);
    for (auto i : idx) draws.insert(draws.end(), pool_.begin() + static_cast<std::ptrdiff_t>(i * s),
                                    pool_.begin() + static_cast<std::ptrdiff_t>((i + 1) * s));
    from_pool = RotationSampler::frozen(std::move(draws));
  }
  try {
    RunLogRow row = step_impl(items, from_pool ? *from_pool : sampler_);
    last_row_ = row;
    ++steps_done_;
    if (hooks_.on_step) hooks_.on_step(row);
    return row;
  } catch (const NumericError& e) {
    throw TrainingDiverged(steps_done_, last_row_, e.what());
  }
}

StepLosses build_step_losses(const TrainConfig& config, const ParamTree& params,
                             std::span<const PointSample> items, RotationSampler& sampler, Rng& rng) {
  StepLosses out;
  const Batch clean = make_batch(items);
  if (config.mode == TrainMode::augment) {
    NoGradGuard guard;  // logged only
    out.l_obj = objective_loss(forward(config.model, params, clean), clean.targets, config.metric);
  } else {
    out.l_obj = objective_loss(forward(config.model, params, clean), clean.targets, config.metric);
  }
  if (config.mode != TrainMode::standard) {
    const auto model = bind_model(config.model, params);
    out.l_equi = equivariance_loss(model, items, ReprSpec::point_cloud(config.model.scalar_width),
                                   config.group_samples, config.metric, sampler, rng);
  }
  return out;
}

StepGradients compute_step_gradients(const TrainConfig& config, const ParamTree& params, const StepLosses& losses,
                                     double alpha, double beta) {
  StepGradients out;
  out.l_obj = losses.l_obj.value().item();
  out.l_equi = losses.l_equi ? losses.l_equi.value().item() : 0.0;
  if (!std::isfinite(out.l_obj) || !std::isfinite(out.l_equi)) throw NumericError("non-finite loss");

  params.zero_gradients();
  switch (config.mode) {
    case TrainMode::standard:
      backward(losses.l_obj);
      out.combined = params.gradients();
      break;
    case TrainMode::augment:
      backward(losses.l_equi);
      out.combined = params.gradients();
      break;
    case TrainMode::constant:
      backward(total_loss(alpha, beta, losses.l_obj, losses.l_equi));
      out.combined = params.gradients();
      break;
    case TrainMode::gradual: {
      backward(losses.l_obj);
      out.objective = params.gradients();
      params.zero_gradients();
      backward(losses.l_equi);
      out.equivariance = params.gradients();
      out.combined.reserve(out.objective.size());
      for (std::size_t b = 0; b < out.objective.size(); ++b) {
        Tensor g(out.objective[b].shape());
        auto dst = g.data();
        auto go = out.objective[b].data();
        auto ge = out.equivariance[b].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = alpha * go[i] + beta * ge[i];
        out.combined.push_back(std::move(g));
      }
      break;
    }
  }
  params.zero_gradients();
  for (std::size_t b = 0; b < out.combined.size(); ++b) {
    if (!out.combined[b].all_finite()) throw NumericError("non-finite gradient in block '" + params[b].name + "'");
  }
  return out;
}

RunLogRow Trainer::step_impl(const std::vector<PointSample>& items, RotationSampler& sampler) {
  const auto t0 = std::chrono::steady_clock::now();

  RunLogRow row;
  row.step = steps_done_;
  row.alpha = penalty_.alpha;
  row.beta = penalty_.beta;

  const StepLosses losses = build_step_losses(config_, params_, items, sampler, rotation_rng_);
  const StepGradients grads = compute_step_gradients(config_, params_, losses, penalty_.alpha, penalty_.beta);
  row.l_obj = grads.l_obj;
  row.l_equi = grads.l_equi;

  if (config_.mode == TrainMode::gradual) {
    const std::size_t w = params_.index_of(params_.last_layer());
    row.grad_norm_obj = norm(grads.objective[w]);
    row.grad_norm_equi = norm(grads.equivariance[w]);
    if (!penalty_.initialized()) capture_initial(penalty_, row.l_obj, row.l_equi);
    if (steps_done_ % config_.gradnorm.stride == 0) {
      gradnorm_step(penalty_, row.l_obj, row.l_equi, grads.objective[w], grads.equivariance[w]);
    }
  }
  adam_step(params_, grads.combined, adam_, config_.lr);

  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

double evaluate(const Predictor& predictor, std::span<const PointSample> dataset, MetricKind metric) {
  if (dataset.empty()) throw ValidationError("evaluate: empty dataset");
  const auto items = centered(dataset);
  double weighted = 0.0;
  for (std::size_t start = 0; start < items.size(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, items.size() - start);
    const Batch batch = make_batch(std::span<const PointSample>(items).subspan(start, n));
    const Tensor pred = predictor(batch);
    NoGradGuard guard;
    const double loss = objective_loss(TapeValue::constant(pred), batch.targets, metric).value().item();
    weighted += loss * static_cast<double>(n);
  }
  return weighted / static_cast<double>(items.size());
}

double evaluate(const ModelConfig& model, const ParamTree& params, std::span<const PointSample> dataset,
                MetricKind metric) {
  return evaluate(bind_predictor(model, params), dataset, metric);
}

TrainResult train(const TrainConfig& config, std::span<const PointSample> train_set,
                  std::span<const PointSample> val_set, TrainHooks hooks) {
  Trainer trainer(config, train_set, std::move(hooks));
  TrainResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  result.log.rows.reserve(config.steps);

  auto validate_now = [&](std::size_t step) {
    if (val_set.empty()) return;
    const double mse = evaluate(config.model, trainer.params(), val_set, MetricKind::l2_squared_mean);
    result.val_history.emplace_back(step, mse);
    if (mse < result.best_val_mse) {
      result.best_val_mse = mse;
      result.best_step = step;
      result.best_params = trainer.params().clone();
    }
  };

  for (std::size_t s = 0; s < config.steps; ++s) {
    result.log.rows.push_back(trainer.step());
    const std::size_t done = s + 1;
    if (done % config.eval_every == 0 || done == config.steps) validate_now(done);
  }
  if (config.steps == 0) validate_now(0);

  result.params = trainer.params().clone();
  if (result.val_history.empty()) {
    result.best_params = result.params.clone();
    result.best_step = config.steps;
    result.best_val_mse = 0.0;
  }
  return result;
}

}  // namespace remul

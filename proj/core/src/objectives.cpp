#include "remul/objectives.hpp"

#include <string>
#include <vector>

#include "remul/errors.hpp"

namespace remul {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::l2_squared_mean: return "l2_squared_mean";
    case MetricKind::l1: return "l1";
  }
  return "unknown";
}

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "l2_squared_mean" || name == "mse" || name == "l2") return MetricKind::l2_squared_mean;
  if (name == "l1") return MetricKind::l1;
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

TapeValue objective_loss(const TapeValue& pred, const Tensor& target, MetricKind metric) {
  if (pred.shape() != target.shape()) {
    throw ValidationError("objective_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                          shape_string(target.shape()));
  }
  const TapeValue diff = ops::sub(pred, TapeValue::constant(target));
  return metric == MetricKind::l1 ? ops::mean(ops::abs(diff)) : ops::mean(ops::square(diff));
}

Batch rotated_batch(std::span<const PointSample> items, const ReprSpec& spec, std::size_t samples_per_item,
                    RotationSampler& sampler, Rng& rng) {
  if (samples_per_item == 0) throw ValidationError("samples_per_item must be at least 1");
  if (items.empty()) throw ValidationError("equivariance loss on an empty batch");
  std::vector<PointSample> rotated;
  rotated.reserve(items.size() * samples_per_item);
  for (const auto& item : items) {
    for (std::size_t s = 0; s < samples_per_item; ++s) {
      const Rotation g = sampler.draw(rng);
      PointSample x = apply_input_action(g, item, spec);
      x.target_positions = apply_output_action(g, item.target_positions, spec);
      rotated.push_back(std::move(x));
    }
  }
  return make_batch(rotated);
}

TapeValue equivariance_loss(const DifferentiableModel& model, std::span<const PointSample> items,
                            const ReprSpec& spec, std::size_t samples_per_item, MetricKind metric,
                            RotationSampler& sampler, Rng& rng) {
  const Batch batch = rotated_batch(items, spec, samples_per_item, sampler, rng);
  return objective_loss(model(batch), batch.targets, metric);
}

TapeValue total_loss(double alpha, double beta, const TapeValue& l_obj, const TapeValue& l_equi) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ValidationError("total_loss: weights must be non-negative (alpha=" + std::to_string(alpha) +
                          ", beta=" + std::to_string(beta) + ")");
  }
  return ops::add(ops::scale(l_obj, alpha), ops::scale(l_equi, beta));
}

}  // namespace remul

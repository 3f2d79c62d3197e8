#pragma once

#include <span>
#include <string_view>

#include "remul/autodiff.hpp"
#include "remul/models.hpp"
#include "remul/point_sample.hpp"
#include "remul/rotation.hpp"

namespace remul {

enum class MetricKind { l2_squared_mean, l1 };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view name);

/// Mean over the batch of the per-item metric, itself a mean over node
/// coordinates. With a shared node count this is the mean over all entries.
TapeValue objective_loss(const TapeValue& pred, const Tensor& target, MetricKind metric);

/// For every item, `samples_per_item` rotations are drawn from `sampler` and
/// the metric between f(phi(g) x) and rho(g) y is averaged over all
/// (item, g) pairs. Items must already be centered. All rotated copies go
/// through the model as a single batch, item-major.
TapeValue equivariance_loss(const DifferentiableModel& model, std::span<const PointSample> items,
                            const ReprSpec& spec, std::size_t samples_per_item, MetricKind metric,
                            RotationSampler& sampler, Rng& rng);

/// Builds the rotated batch used by equivariance_loss without evaluating it.
Batch rotated_batch(std::span<const PointSample> items, const ReprSpec& spec, std::size_t samples_per_item,
                    RotationSampler& sampler, Rng& rng);

/// alpha * l_obj + beta * l_equi. Both weights must be non-negative.
TapeValue total_loss(double alpha, double beta, const TapeValue& l_obj, const TapeValue& l_equi);

}  // namespace remul

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "remul/models.hpp"
#include "remul/point_sample.hpp"
#include "remul/rotation.hpp"

namespace remul {

enum class EquiMetric { E, Eprime };

std::string_view to_string(EquiMetric metric);
EquiMetric parse_equi_metric(std::string_view name);

struct EquiReport {
  EquiMetric metric_kind = EquiMetric::E;
  double value = 0.0;
  std::size_t M = 0;
  std::size_t dataset_size = 0;
  std::uint64_t seed = 0;
};

/// Both estimators computed from one set of group samples.
struct EquiErrors {
  double E = 0.0;
  double Eprime = 0.0;
};

/// For every item x a fresh set {g_1..g_M} is drawn from a stream keyed by
/// (seed, content of x), so results do not depend on dataset order. With
/// the Euclidean norm over the flattened N x 3 output:
///
///   E  = mean_x | (1/M) sum_i rho(g_i) f(x) - (1/M) sum_i f(phi(g_i) x) |
///   E' = mean_x (1/M) sum_i | f(phi(g_i) x) - rho(g_i) f(x) |
///
/// Items are expected to be centered.
EquiErrors equivariance_errors(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                               std::size_t M, std::uint64_t seed, RotationSampler sampler = RotationSampler::haar());

EquiReport equivariance_error_E(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                                std::size_t M, std::uint64_t seed);
EquiReport equivariance_error_Eprime(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                                     std::size_t M, std::uint64_t seed);

// "metric,value,M,dataset_size,seed,checkpoint"
std::string equi_report_csv_header();
std::string to_csv_row(const EquiReport& report, const std::string& checkpoint_path);

/// FNV-1a over the sample's inputs (positions, velocities, scalars).
std::uint64_t content_hash(const PointSample& x);

}  // namespace remul

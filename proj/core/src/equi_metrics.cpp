#include "remul/equi_metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "remul/errors.hpp"
#include "remul/format.hpp"

namespace remul {

namespace {

constexpr std::size_t kChunk = 256;

void hash_double(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::string_view to_string(EquiMetric metric) { return metric == EquiMetric::E ? "E" : "Eprime"; }

EquiMetric parse_equi_metric(std::string_view name) {
  if (name == "E") return EquiMetric::E;
  if (name == "Eprime" || name == "E'") return EquiMetric::Eprime;
  throw ValidationError("unknown equivariance metric '" + std::string(name) + "' (expected E or Eprime)");
}

std::uint64_t content_hash(const PointSample& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : x.positions)
    for (double v : p) hash_double(h, v);
  for (const auto& p : x.velocities)
    for (double v : p) hash_double(h, v);
  for (double v : x.scalars) hash_double(h, v);
  return h;
}

EquiErrors equivariance_errors(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                               std::size_t M, std::uint64_t seed, RotationSampler sampler) {
  if (M == 0) throw ValidationError("M must be at least 1");
  if (dataset.empty()) throw ValidationError("equivariance error on an empty dataset");

  double sum_e = 0.0;
  double sum_eprime = 0.0;
  for (const auto& x : dataset) {
    Rng rng(mix_seed(seed, content_hash(x)));
    std::vector<Rotation> gs;
    gs.reserve(M);
    for (std::size_t i = 0; i < M; ++i) gs.push_back(sampler.draw(rng));

    const PointSample single[] = {x};
    const Tensor fx = f(make_batch(single));
    const std::size_t width = fx.size();

    std::vector<double> mean_rho(width, 0.0);   // sum_i rho(g_i) f(x)
    std::vector<double> mean_f(width, 0.0);     // sum_i f(phi(g_i) x)
    double sum_norms = 0.0;
    for (std::size_t start = 0; start < M; start += kChunk) {
      const std::size_t end = std::min(M, start + kChunk);
      std::vector<PointSample> rotated;
      rotated.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) rotated.push_back(apply_input_action(gs[i], x, spec));
      const Tensor out = f(make_batch(rotated));
      for (std::size_t i = start; i < end; ++i) {
        const Tensor rho_fx = apply_output_action(gs[i], fx, spec);
        const double* fr = out.data().data() + (i - start) * width;
        double sq = 0.0;
        for (std::size_t k = 0; k < width; ++k) {
          mean_rho[k] += rho_fx[k];
          mean_f[k] += fr[k];
          const double d = fr[k] - rho_fx[k];
          sq += d * d;
        }
        sum_norms += std::sqrt(sq);
      }
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < width; ++k) {
      const double d = (mean_rho[k] - mean_f[k]) / static_cast<double>(M);
      sq += d * d;
    }
    sum_e += std::sqrt(sq);
    sum_eprime += sum_norms / static_cast<double>(M);
  }
  const double n = static_cast<double>(dataset.size());
  return {sum_e / n, sum_eprime / n};
}

EquiReport equivariance_error_E(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                                std::size_t M, std::uint64_t seed) {
  return {EquiMetric::E, equivariance_errors(f, dataset, spec, M, seed).E, M, dataset.size(), seed};
}

EquiReport equivariance_error_Eprime(const Predictor& f, std::span<const PointSample> dataset, const ReprSpec& spec,
                                     std::size_t M, std::uint64_t seed) {
  return {EquiMetric::Eprime, equivariance_errors(f, dataset, spec, M, seed).Eprime, M, dataset.size(), seed};
}

std::string equi_report_csv_header() { return "metric,value,M,dataset_size,seed,checkpoint"; }

std::string to_csv_row(const EquiReport& r, const std::string& checkpoint_path) {
  std::ostringstream os;
  os << to_string(r.metric_kind) << ',' << format_double(r.value) << ',' << r.M << ',' << r.dataset_size << ',' << r.seed << ','
     << checkpoint_path;
  return os.str();
}

}  // namespace remul

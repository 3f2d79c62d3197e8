#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "remul/autodiff.hpp"
#include "remul/models.hpp"
#include "remul/point_sample.hpp"
#include "remul/rotation.hpp"

namespace remul::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline PointSample random_sample(std::size_t nodes, std::size_t scalar_width, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> mass(0.5, 2.0);
  PointSample x;
  x.scalar_width = scalar_width;
  for (std::size_t i = 0; i < nodes; ++i) {
    x.positions.push_back({n(rng), n(rng), n(rng)});
    x.velocities.push_back({n(rng), n(rng), n(rng)});
    for (std::size_t k = 0; k < scalar_width; ++k) x.scalars.push_back(k == 0 ? mass(rng) : n(rng));
    x.target_positions.push_back({n(rng), n(rng), n(rng)});
  }
  return x;
}

inline std::vector<PointSample> random_samples(std::size_t count, std::size_t nodes, std::size_t scalar_width,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PointSample> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(center(random_sample(nodes, scalar_width, rng)).first);
  return out;
}

inline bool close(double a, double b, double abs_tol, double rel_tol) {
  return std::fabs(a - b) <= std::max(abs_tol, rel_tol * std::max(std::fabs(a), std::fabs(b)));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline ModelConfig small_model(ModelFamily family, std::size_t nodes = 4) {
  ModelConfig c = default_model_config(family);
  c.hidden_dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.node_count = nodes;
  return c;
}

}  // namespace remul::test

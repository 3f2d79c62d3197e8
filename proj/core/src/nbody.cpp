#include "remul/nbody.hpp"

#include <cmath>
#include <random>
#include <string>

#include "remul/errors.hpp"

namespace remul {

void NBodyConfig::validate() const {
  if (n_objects == 0) throw ValidationError("n_objects must be positive");
  if (!(center_mass_min <= center_mass_max) || !(orbit_radius_min <= orbit_radius_max) ||
      !(orbit_mass_min <= orbit_mass_max)) {
    throw ValidationError("empty n-body sampling range");
  }
  if (center_mass_min <= 0.0 || orbit_mass_min <= 0.0) throw ValidationError("masses must be positive");
  if (steps == 0) throw ValidationError("steps must be at least 1");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(softening >= 0.0)) throw ValidationError("softening must be non-negative");
  if (!(velocity_std >= 0.0)) throw ValidationError("velocity_std must be non-negative");
  if (!(rot_min_deg <= rot_max_deg) || rot_min_deg < -180.0 || rot_max_deg > 180.0) {
    throw ValidationError("rotation range must satisfy -180 <= min <= max <= 180");
  }
}

void simulate_in_place(std::vector<Vec3>& x, std::vector<Vec3>& v, std::span<const double> m, std::size_t steps,
                       double dt, double g_const, double softening) {
  const std::size_t n = x.size();
  if (v.size() != n || m.size() != n) throw ValidationError("simulate: array sizes disagree");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (x[i] == x[j]) throw ValidationError("simulate: bodies " + std::to_string(i) + " and " + std::to_string(j) + " coincide");

  const double soft2 = softening * softening;
  std::vector<Vec3> acc(n);
  for (std::size_t step = 0; step < steps; ++step) {
    for (auto& a : acc) a = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const Vec3 d{x[j][0] - x[i][0], x[j][1] - x[i][1], x[j][2] - x[i][2]};
        const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + soft2;
        const double inv_r3 = g_const / (r2 * std::sqrt(r2));
        // Equal and opposite contributions keep total momentum fixed.
        for (int k = 0; k < 3; ++k) {
          const double f = d[k] * inv_r3;
          acc[i][k] += m[j] * f;
          acc[j][k] -= m[i] * f;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        v[i][k] += dt * acc[i][k];
        x[i][k] += dt * v[i][k];
      }
      if (!std::isfinite(x[i][0] + x[i][1] + x[i][2] + v[i][0] + v[i][1] + v[i][2])) {
        throw NumericError("simulate: non-finite state at step " + std::to_string(step));
      }
    }
  }
}

std::vector<Vec3> simulate(const PointSample& initial, const NBodyConfig& config) {
  if (!initial.has_mass()) throw ValidationError("simulate: sample has no mass channel");
  std::vector<Vec3> x = initial.positions;
  std::vector<Vec3> v = initial.velocities;
  std::vector<double> m(initial.node_count());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = initial.scalar(i, 0);
  simulate_in_place(x, v, m, config.steps, config.dt, config.g_const, config.softening);
  return x;
}

Rotation dataset_rotation(const NBodyConfig& config, std::size_t index) {
  Rng rng(mix_seed(mix_seed(config.seed, index), 0x726f74ULL));
  return sample_rotation_angle_range(rng, config.rot_min_deg, config.rot_max_deg);
}

std::vector<PointSample> generate_dataset(const NBodyConfig& config) {
  config.validate();
  const ReprSpec spec = ReprSpec::point_cloud(1);
  std::vector<PointSample> out;
  out.reserve(config.n_samples);
  for (std::size_t idx = 0; idx < config.n_samples; ++idx) {
    Rng rng(mix_seed(config.seed, idx));
    std::uniform_real_distribution<double> center_mass(config.center_mass_min, config.center_mass_max);
    std::uniform_real_distribution<double> orbit_mass(config.orbit_mass_min, config.orbit_mass_max);
    std::uniform_real_distribution<double> radius(config.orbit_radius_min, config.orbit_radius_max);
    std::normal_distribution<double> velocity(0.0, config.velocity_std);

    PointSample s;
    s.scalar_width = 1;
    for (std::size_t i = 0; i < config.n_objects; ++i) {
      if (i == 0) {
        s.scalars.push_back(center_mass(rng));
        s.positions.push_back({0.0, 0.0, 0.0});
      } else {
        s.scalars.push_back(orbit_mass(rng));
        const Vec3 dir = random_unit_vector(rng);
        const double r = radius(rng);
        s.positions.push_back({r * dir[0], r * dir[1], r * dir[2]});
      }
    }
    for (std::size_t i = 0; i < config.n_objects; ++i) {
      s.velocities.push_back({velocity(rng), velocity(rng), velocity(rng)});
    }
    s.target_positions = simulate(s, config);
    s = center(s, true).first;

    const Rotation g = dataset_rotation(config, idx);
    PointSample rotated = apply_input_action(g, s, spec);
    rotated.target_positions = apply_output_action(g, s.target_positions, spec);
    out.push_back(std::move(rotated));
  }
  return out;
}

}  // namespace remul

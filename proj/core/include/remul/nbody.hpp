#pragma once

#include <cstdint>
#include <vector>

#include "remul/point_sample.hpp"

namespace remul {

/// Gravitational N-body dataset recipe: a heavy body at the origin and
/// lighter bodies placed at a uniform radius in a uniform direction.
struct NBodyConfig {
  std::size_t n_objects = 4;
  double center_mass_min = 1.0;
  double center_mass_max = 10.0;
  double orbit_radius_min = 0.1;
  double orbit_radius_max = 1.0;
  double orbit_mass_min = 0.01;
  double orbit_mass_max = 0.1;
  double velocity_std = 0.1;
  std::size_t steps = 100;
  double dt = 0.01;
  double g_const = 1.0;
  double softening = 0.1;
  double rot_min_deg = -10.0;
  double rot_max_deg = 10.0;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Explicit Euler on Newtonian gravity with Plummer softening:
///   a_i = sum_{j != i} G m_j (x_j - x_i) / (|x_j - x_i|^2 + s^2)^{3/2}
///   v <- v + dt a;  x <- x + dt v
/// Operates in place on positions and velocities; masses come from the
/// first scalar channel. Throws NumericError naming the step on overflow.
void simulate_in_place(std::vector<Vec3>& positions, std::vector<Vec3>& velocities, std::span<const double> masses,
                       std::size_t steps, double dt, double g_const, double softening);

/// Final positions after `config.steps` steps from the sample's inputs.
std::vector<Vec3> simulate(const PointSample& initial, const NBodyConfig& config);

/// Sample i is drawn from an RNG keyed by (seed, i): masses, placement and
/// Gaussian velocities, then simulated, centered on the mass-weighted center
/// of mass and finally rotated (inputs and targets) by one draw from
/// [rot_min_deg, rot_max_deg].
std::vector<PointSample> generate_dataset(const NBodyConfig& config);

/// The rotation applied to sample `index` by generate_dataset.
Rotation dataset_rotation(const NBodyConfig& config, std::size_t index);

}  // namespace remul

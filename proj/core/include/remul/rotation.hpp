#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace remul {

using Rng = std::mt19937_64;
using Vec3 = std::array<double, 3>;

/// Element of SO(3) stored as a row-major 3x3 matrix.
class Rotation {
 public:
  Rotation();  // identity

  // Rejects matrices that are not orthonormal with det +1 (tolerance 1e-9).
  static Rotation from_matrix(const std::array<double, 9>& m);
  // Normalizes (w, x, y, z) first; the zero quaternion is rejected.
  static Rotation from_quaternion(double w, double x, double y, double z);
  // Right-handed rotation by `radians` about `axis` (normalized internally).
  static Rotation from_axis_angle(const Vec3& axis, double radians);

  const std::array<double, 9>& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_[static_cast<std::size_t>(3 * r + c)]; }

  Vec3 apply(const Vec3& v) const;
  Rotation inverse() const;
  Rotation operator*(const Rotation& rhs) const;

  double trace() const { return m_[0] + m_[4] + m_[8]; }
  // Rotation angle in [0, pi] recovered from the trace.
  double angle() const;

  friend bool operator==(const Rotation&, const Rotation&) = default;

 private:
  explicit Rotation(const std::array<double, 9>& m) : m_(m) {}
  std::array<double, 9> m_;
};

Vec3 random_unit_vector(Rng& rng);

/// Haar-uniform rotation from a normalized quaternion of four standard normals.
Rotation sample_rotation_uniform(Rng& rng);

/// Axis uniform on the sphere, angle uniform in [min_deg, max_deg]. When the
/// range is one-sided positive the sign is flipped with probability 1/2, so
/// [90, 180] also covers [-180, -90]. Requires -180 <= min <= max <= 180.
Rotation sample_rotation_angle_range(Rng& rng, double min_deg, double max_deg);

/// Source of group elements for losses and metrics.
class RotationSampler {
 public:
  enum class Kind { haar, angle_range, identity, frozen };

  static RotationSampler haar();
  static RotationSampler angle_range(double min_deg, double max_deg);
  static RotationSampler identity();
  // Replays the given rotations cyclically, ignoring the RNG.
  static RotationSampler frozen(std::vector<Rotation> rotations);

  Rotation draw(Rng& rng);
  Kind kind() const { return kind_; }
  double min_deg() const { return min_deg_; }
  double max_deg() const { return max_deg_; }

 private:
  Kind kind_ = Kind::haar;
  double min_deg_ = -180.0;
  double max_deg_ = 180.0;
  std::vector<Rotation> frozen_;
  std::size_t cursor_ = 0;
};

/// splitmix64 finalizer; used to derive independent per-item RNG streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace remul

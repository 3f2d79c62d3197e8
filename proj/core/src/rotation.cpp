#include "remul/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "remul/errors.hpp"

namespace remul {

Rotation::Rotation() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Rotation Rotation::from_matrix(const std::array<double, 9>& m) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += m[static_cast<std::size_t>(3 * k + i)] * m[static_cast<std::size_t>(3 * k + j)];
      if (std::fabs(dot - (i == j ? 1.0 : 0.0)) > 1e-9) throw ValidationError("matrix is not orthonormal");
    }
  }
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::fabs(det - 1.0) > 1e-9) throw ValidationError("matrix has determinant " + std::to_string(det));
  return Rotation(m);
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n == 0.0) throw ValidationError("zero quaternion");
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  return Rotation({1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                   2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                   2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double radians) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n == 0.0) throw ValidationError("zero rotation axis");
  const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
  const double s = std::sin(radians), c = std::cos(radians), t = 1.0 - c;
  // Rodrigues: I + s K + (1 - c) K^2
  return Rotation({c + t * x * x, t * x * y - s * z, t * x * z + s * y,
                   t * x * y + s * z, c + t * y * y, t * y * z - s * x,
                   t * x * z - s * y, t * y * z + s * x, c + t * z * z});
}

Vec3 Rotation::apply(const Vec3& v) const {
  return {m_[0] * v[0] + m_[1] * v[1] + m_[2] * v[2],
          m_[3] * v[0] + m_[4] * v[1] + m_[5] * v[2],
          m_[6] * v[0] + m_[7] * v[1] + m_[8] * v[2]};
}

Rotation Rotation::inverse() const {
  return Rotation({m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]});
}

Rotation Rotation::operator*(const Rotation& rhs) const {
  std::array<double, 9> out{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) out[3 * i + j] += m_[3 * i + k] * rhs.m_[3 * k + j];
  return Rotation(out);
}

double Rotation::angle() const { return std::acos(std::clamp((trace() - 1.0) / 2.0, -1.0, 1.0)); }

Vec3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Vec3 v{normal(rng), normal(rng), normal(rng)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

Rotation sample_rotation_uniform(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    const double w = normal(rng), x = normal(rng), y = normal(rng), z = normal(rng);
    if (w * w + x * x + y * y + z * z > 1e-24) return Rotation::from_quaternion(w, x, y, z);
  }
}

Rotation sample_rotation_angle_range(Rng& rng, double min_deg, double max_deg) {
  if (!(min_deg <= max_deg)) throw ValidationError("empty rotation range");
  if (min_deg < -180.0 || max_deg > 180.0) throw ValidationError("rotation range must lie within [-180, 180]");
  const Vec3 axis = random_unit_vector(rng);
  std::uniform_real_distribution<double> uniform(min_deg, max_deg);
  double deg = min_deg == max_deg ? min_deg : uniform(rng);
  if (min_deg >= 0.0 && max_deg > 0.0) {
    std::bernoulli_distribution flip(0.5);
    if (flip(rng)) deg = -deg;
  }
  return Rotation::from_axis_angle(axis, deg * std::numbers::pi / 180.0);
}

RotationSampler RotationSampler::haar() { return RotationSampler{}; }

RotationSampler RotationSampler::angle_range(double min_deg, double max_deg) {
  if (!(min_deg <= max_deg)) throw ValidationError("empty rotation range");
  if (min_deg < -180.0 || max_deg > 180.0) throw ValidationError("rotation range must lie within [-180, 180]");
  RotationSampler s;
  s.kind_ = Kind::angle_range;
  s.min_deg_ = min_deg;
  s.max_deg_ = max_deg;
  return s;
}

RotationSampler RotationSampler::identity() {
  RotationSampler s;
  s.kind_ = Kind::identity;
  return s;
}

RotationSampler RotationSampler::frozen(std::vector<Rotation> rotations) {
  if (rotations.empty()) throw ValidationError("frozen rotation set is empty");
  RotationSampler s;
  s.kind_ = Kind::frozen;
  s.frozen_ = std::move(rotations);
  return s;
}

Rotation RotationSampler::draw(Rng& rng) {
  switch (kind_) {
    case Kind::haar: return sample_rotation_uniform(rng);
    case Kind::angle_range: return sample_rotation_angle_range(rng, min_deg_, max_deg_);
    case Kind::identity: return Rotation{};
    case Kind::frozen: {
      const Rotation& r = frozen_[cursor_];
      cursor_ = (cursor_ + 1) % frozen_.size();
      return r;
    }
  }
  return Rotation{};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace remul

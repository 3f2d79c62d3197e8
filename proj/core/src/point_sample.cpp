#include "remul/point_sample.hpp"

#include <cmath>
#include <string>

#include "remul/errors.hpp"

namespace remul {

namespace {

bool finite3(const Vec3& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

}  // namespace

void PointSample::validate() const {
  const std::size_t n = positions.size();
  if (n == 0) throw ValidationError("sample has no nodes");
  if (velocities.size() != n || target_positions.size() != n || scalars.size() != n * scalar_width) {
    throw ValidationError("sample arrays disagree on node count " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!finite3(positions[i]) || !finite3(velocities[i]) || !finite3(target_positions[i])) {
      throw ValidationError("non-finite entry at node " + std::to_string(i));
    }
  }
  for (double s : scalars)
    if (!std::isfinite(s)) throw ValidationError("non-finite scalar feature");
}

ReprSpec ReprSpec::point_cloud(std::size_t scalar_width) {
  ReprSpec spec;
  spec.input_channels = {{ChannelRole::vector3, 3}, {ChannelRole::vector3, 3}};
  if (scalar_width) spec.input_channels.push_back({ChannelRole::scalar, scalar_width});
  spec.output_channels = {{ChannelRole::vector3, 3}};
  return spec;
}

ReprSpec ReprSpec::invariant_output(std::size_t scalar_width) {
  ReprSpec spec = point_cloud(scalar_width);
  spec.output_channels = {{ChannelRole::scalar, 3}};
  return spec;
}

std::size_t ReprSpec::input_width() const {
  std::size_t w = 0;
  for (const auto& c : input_channels) w += c.width;
  return w;
}

std::size_t ReprSpec::output_width() const {
  std::size_t w = 0;
  for (const auto& c : output_channels) w += c.width;
  return w;
}

void ReprSpec::validate() const {
  for (const auto* list : {&input_channels, &output_channels}) {
    for (const auto& c : *list) {
      if (c.width == 0) throw ValidationError("representation channel with zero width");
      if (c.role == ChannelRole::vector3 && c.width != 3) throw ValidationError("vector3 channel must have width 3");
    }
  }
}

namespace {

// Rotates the vector3 channels of a row of `width` features in place.
void act_on_row(const Rotation& g, const std::vector<Channel>& channels, double* row) {
  std::size_t off = 0;
  for (const auto& c : channels) {
    if (c.role == ChannelRole::vector3) {
      const Vec3 v = g.apply({row[off], row[off + 1], row[off + 2]});
      row[off] = v[0];
      row[off + 1] = v[1];
      row[off + 2] = v[2];
    }
    off += c.width;
  }
}

}  // namespace

PointSample apply_input_action(const Rotation& g, const PointSample& x, const ReprSpec& spec) {
  spec.validate();
  const std::size_t width = 6 + x.scalar_width;
  if (spec.input_width() != width) {
    throw ValidationError("input spec width " + std::to_string(spec.input_width()) + " != sample feature width " +
                          std::to_string(width));
  }
  PointSample out = x;
  std::vector<double> row(width);
  for (std::size_t i = 0; i < x.node_count(); ++i) {
    std::copy(x.positions[i].begin(), x.positions[i].end(), row.begin());
    std::copy(x.velocities[i].begin(), x.velocities[i].end(), row.begin() + 3);
    for (std::size_t k = 0; k < x.scalar_width; ++k) row[6 + k] = x.scalar(i, k);
    act_on_row(g, spec.input_channels, row.data());
    std::copy_n(row.begin(), 3, out.positions[i].begin());
    std::copy_n(row.begin() + 3, 3, out.velocities[i].begin());
    for (std::size_t k = 0; k < x.scalar_width; ++k) out.scalars[i * x.scalar_width + k] = row[6 + k];
  }
  return out;
}

std::vector<Vec3> apply_output_action(const Rotation& g, std::span<const Vec3> y, const ReprSpec& spec) {
  spec.validate();
  if (spec.output_width() != 3) throw ValidationError("output spec width must be 3");
  std::vector<Vec3> out(y.begin(), y.end());
  for (auto& v : out) act_on_row(g, spec.output_channels, v.data());
  return out;
}

Tensor apply_output_action(const Rotation& g, const Tensor& y, const ReprSpec& spec) {
  spec.validate();
  if (spec.output_width() != y.cols() || y.cols() != 3) {
    throw ValidationError("output spec width does not match tensor of shape " + shape_string(y.shape()));
  }
  Tensor out = y;
  for (std::size_t r = 0; r < out.rows(); ++r) act_on_row(g, spec.output_channels, out.data().data() + 3 * r);
  return out;
}

Vec3 center_of_mass(const PointSample& x, bool weighted) {
  Vec3 com{0, 0, 0};
  double total = 0.0;
  for (std::size_t i = 0; i < x.node_count(); ++i) {
    const double m = weighted ? x.scalar(i, 0) : 1.0;
    if (weighted && !(m > 0.0)) throw ValidationError("non-positive mass at node " + std::to_string(i));
    for (int d = 0; d < 3; ++d) com[d] += m * x.positions[i][d];
    total += m;
  }
  if (!(total > 0.0)) throw ValidationError("non-positive total mass");
  for (auto& c : com) c /= total;
  return com;
}

std::pair<PointSample, Vec3> center(const PointSample& x, bool weighted) {
  if (weighted && !x.has_mass()) throw ValidationError("weighted centering requires a mass channel");
  const Vec3 com = center_of_mass(x, weighted);
  PointSample out = x;
  for (auto& p : out.positions)
    for (int d = 0; d < 3; ++d) p[d] -= com[d];
  for (auto& p : out.target_positions)
    for (int d = 0; d < 3; ++d) p[d] -= com[d];
  return {std::move(out), com};
}

std::pair<PointSample, Vec3> center(const PointSample& x) { return center(x, x.has_mass()); }

Batch make_batch(std::span<const PointSample> samples) {
  if (samples.empty()) throw ValidationError("empty batch");
  Batch b;
  b.items = samples.size();
  b.nodes = samples[0].node_count();
  b.scalar_width = samples[0].scalar_width;
  const std::size_t rows = b.items * b.nodes;
  std::vector<double> pos, vel, sca, tgt;
  pos.reserve(rows * 3);
  vel.reserve(rows * 3);
  tgt.reserve(rows * 3);
  sca.reserve(rows * b.scalar_width);
  for (const auto& s : samples) {
    if (s.node_count() != b.nodes || s.scalar_width != b.scalar_width) {
      throw ValidationError("batch items must share node count and scalar width");
    }
    s.validate();
    for (std::size_t i = 0; i < b.nodes; ++i) {
      pos.insert(pos.end(), s.positions[i].begin(), s.positions[i].end());
      vel.insert(vel.end(), s.velocities[i].begin(), s.velocities[i].end());
      tgt.insert(tgt.end(), s.target_positions[i].begin(), s.target_positions[i].end());
    }
    sca.insert(sca.end(), s.scalars.begin(), s.scalars.end());
  }
  b.positions = Tensor(Shape{rows, 3}, std::move(pos));
  b.velocities = Tensor(Shape{rows, 3}, std::move(vel));
  b.targets = Tensor(Shape{rows, 3}, std::move(tgt));
  if (b.scalar_width) b.scalars = Tensor(Shape{rows, b.scalar_width}, std::move(sca));
  return b;
}

}  // namespace remul

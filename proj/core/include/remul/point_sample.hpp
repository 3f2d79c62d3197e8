#pragma once

#include <span>
#include <utility>
#include <vector>

#include "remul/rotation.hpp"
#include "remul/tensor.hpp"

namespace remul {

/// One training item: N nodes with positions, velocities, k scalar features
/// per node (masses for N-body), and target positions.
struct PointSample {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<double> scalars;  // N x scalar_width, row-major
  std::size_t scalar_width = 0;
  std::vector<Vec3> target_positions;

  std::size_t node_count() const { return positions.size(); }
  double scalar(std::size_t node, std::size_t channel) const { return scalars[node * scalar_width + channel]; }
  bool has_mass() const { return scalar_width >= 1; }

  // Throws ValidationError unless all arrays share N >= 1 and entries are finite.
  void validate() const;

  friend bool operator==(const PointSample&, const PointSample&) = default;
};

enum class ChannelRole { vector3, scalar };

struct Channel {
  ChannelRole role;
  std::size_t width;
};

/// Declares how each per-node channel transforms. Input channels cover the
/// concatenated node features (positions | velocities | scalars); output
/// channels cover the 3 predicted columns.
struct ReprSpec {
  std::vector<Channel> input_channels;
  std::vector<Channel> output_channels;

  // positions and velocities rotate, scalars are invariant, output rotates.
  static ReprSpec point_cloud(std::size_t scalar_width);
  // Same input action with a trivial output action (invariance).
  static ReprSpec invariant_output(std::size_t scalar_width);

  std::size_t input_width() const;
  std::size_t output_width() const;
  void validate() const;
};

PointSample apply_input_action(const Rotation& g, const PointSample& x, const ReprSpec& spec);
std::vector<Vec3> apply_output_action(const Rotation& g, std::span<const Vec3> y, const ReprSpec& spec);
// Rows x 3 tensor variant (each row is one node).
Tensor apply_output_action(const Rotation& g, const Tensor& y, const ReprSpec& spec);

/// Subtracts the center of mass (weighted) or centroid from positions and
/// targets. Velocities are untouched. Returns the subtracted offset.
std::pair<PointSample, Vec3> center(const PointSample& x, bool weighted);
// Weighted when a mass channel exists.
std::pair<PointSample, Vec3> center(const PointSample& x);

Vec3 center_of_mass(const PointSample& x, bool weighted);

/// Stacked batch of items sharing node count and scalar width. All tensors
/// have items * nodes rows; `scalars` is meaningful only when scalar_width > 0.
struct Batch {
  std::size_t items = 0;
  std::size_t nodes = 0;
  std::size_t scalar_width = 0;
  Tensor positions;
  Tensor velocities;
  Tensor scalars;
  Tensor targets;

  std::size_t rows() const { return items * nodes; }
};

Batch make_batch(std::span<const PointSample> samples);

}  // namespace remul

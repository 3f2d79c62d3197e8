#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "remul/autodiff.hpp"
#include "remul/models.hpp"
#include "remul/point_sample.hpp"

namespace remul {

/// One tensor per ParamTree block, in block order.
using Direction = std::vector<Tensor>;

struct DirectionPair {
  Direction d1;
  Direction d2;
  std::vector<std::string> warnings;  // zero-norm blocks
};

/// Gaussian directions, each block rescaled to the norm of the matching
/// parameter block (filter normalization). d1 and d2 use separate streams.
DirectionPair sample_directions(const ParamTree& params, std::uint64_t seed);

struct SurfaceGrid {
  std::size_t resolution = 0;
  double range = 0.0;
  std::vector<double> axis;    // a_i == b_i, symmetric with axis[mid] == 0
  std::vector<double> values;  // row-major [a][b]; +inf marks overflow

  double at(std::size_t i, std::size_t j) const { return values[i * resolution + j]; }
  std::size_t overflow_count() const;
  void write_csv(std::ostream& out) const;
};

inline constexpr std::size_t kDefaultSurfaceResolution = 41;
inline constexpr double kDefaultSurfaceRange = 1.0;

/// values[i][j] = loss(theta + axis[i] d1 + axis[j] d2). `params` is restored
/// bit-for-bit afterwards. Resolution must be odd.
SurfaceGrid scan(const std::function<double(const ParamTree&)>& loss, const ParamTree& params, const Direction& d1,
                 const Direction& d2, std::size_t resolution = kDefaultSurfaceResolution,
                 double range = kDefaultSurfaceRange);

/// Clean objective (MSE) of the model over the full dataset.
SurfaceGrid scan(const ModelConfig& model, const ParamTree& params, std::span<const PointSample> dataset,
                 const Direction& d1, const Direction& d2, std::size_t resolution = kDefaultSurfaceResolution,
                 double range = kDefaultSurfaceRange);

}  // namespace remul

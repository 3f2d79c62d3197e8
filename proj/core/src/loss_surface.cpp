#include "remul/loss_surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "remul/errors.hpp"
#include "remul/format.hpp"
#include "remul/rotation.hpp"
#include "remul/trainer.hpp"

namespace remul {

namespace {

double block_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Direction draw_direction(const ParamTree& params, std::uint64_t seed, std::vector<std::string>* warnings) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Direction d;
  d.reserve(params.size());
  for (const auto& entry : params) {
    const Tensor& theta = entry.value.value();
    Tensor dir(theta.shape());
    auto out = dir.data();
    for (double& x : out) x = normal(rng);
    const double target = block_norm(theta.data());
    if (target == 0.0) {
      dir.fill(0.0);
      if (warnings) warnings->push_back("block '" + entry.name + "' has zero norm; direction set to zero");
    } else {
      const double scale = target / block_norm(out);
      for (double& x : out) x *= scale;
    }
    d.push_back(std::move(dir));
  }
  return d;
}

void check_direction(const ParamTree& params, const Direction& d, const char* name) {
  if (d.size() != params.size()) throw ValidationError(std::string(name) + " has the wrong block count");
  for (std::size_t b = 0; b < d.size(); ++b) {
    if (d[b].shape() != params[b].value.shape()) {
      throw ValidationError(std::string(name) + " block '" + params[b].name + "' has the wrong shape");
    }
  }
}

}  // namespace

DirectionPair sample_directions(const ParamTree& params, std::uint64_t seed) {
  DirectionPair out;
  out.d1 = draw_direction(params, mix_seed(seed, 1), &out.warnings);
  out.d2 = draw_direction(params, mix_seed(seed, 2), nullptr);
  return out;
}

std::size_t SurfaceGrid::overflow_count() const {
  std::size_t n = 0;
  for (double v : values) n += std::isinf(v) ? 1 : 0;
  return n;
}

void SurfaceGrid::write_csv(std::ostream& out) const {
  out << "a\\b";
  for (double b : axis) out << ',' << format_double(b);
  out << '\n';
  for (std::size_t i = 0; i < resolution; ++i) {
    out << format_double(axis[i]);
    for (std::size_t j = 0; j < resolution; ++j) {
      const double v = at(i, j);
      out << ',';
      if (std::isinf(v)) {
        out << "inf";
      } else {
        out << format_double(v);
      }
    }
    out << '\n';
  }
}

SurfaceGrid scan(const std::function<double(const ParamTree&)>& loss, const ParamTree& params, const Direction& d1,
                 const Direction& d2, std::size_t resolution, double range) {
  if (resolution == 0 || resolution % 2 == 0) throw ValidationError("grid resolution must be odd");
  if (!(range > 0.0) || !std::isfinite(range)) throw ValidationError("scan range must be positive");
  check_direction(params, d1, "d1");
  check_direction(params, d2, "d2");

  SurfaceGrid grid;
  grid.resolution = resolution;
  grid.range = range;
  grid.axis.resize(resolution, 0.0);
  const std::size_t mid = resolution / 2;
  for (std::size_t i = 0; i < resolution; ++i) {
    if (i == mid) continue;
    const double t = 2.0 * static_cast<double>(i) / static_cast<double>(resolution - 1) - 1.0;
    grid.axis[i] = range * t;
  }

  // Work on a private copy so the caller's leaves are never written.
  ParamTree probe = params.clone();
  const std::vector<Tensor> theta = params.values();
  grid.values.assign(resolution * resolution, 0.0);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      const double a = grid.axis[i];
      const double b = grid.axis[j];
      for (std::size_t k = 0; k < theta.size(); ++k) {
        auto dst = probe[k].value.mutable_data();
        auto t = theta[k].data();
        auto u = d1[k].data();
        auto v = d2[k].data();
        if (a == 0.0 && b == 0.0) {
          std::copy(t.begin(), t.end(), dst.begin());
        } else {
          for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = t[n] + a * u[n] + b * v[n];
        }
      }
      double value = std::numeric_limits<double>::infinity();
      try {
        value = loss(probe);
        if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
      } catch (const NumericError&) {
      }
      grid.values[i * resolution + j] = value;
    }
  }
  return grid;
}

SurfaceGrid scan(const ModelConfig& model, const ParamTree& params, std::span<const PointSample> dataset,
                 const Direction& d1, const Direction& d2, std::size_t resolution, double range) {
  return scan([&](const ParamTree& p) { return evaluate(model, p, dataset, MetricKind::l2_squared_mean); }, params,
              d1, d2, resolution, range);
}

}  // namespace remul

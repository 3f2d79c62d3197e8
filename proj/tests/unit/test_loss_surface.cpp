#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "remul/errors.hpp"
#include "remul/loss_surface.hpp"
#include "remul/trainer.hpp"

using namespace remul;
using remul::test::random_samples;
using remul::test::small_model;

namespace {

double block_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

double cosine(const Direction& a, const Direction& b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      ab += a[k][i] * b[k][i];
      aa += a[k][i] * a[k][i];
      bb += b[k][i] * b[k][i];
    }
  }
  return ab / std::sqrt(aa * bb);
}

// Linear regression: a one-layer mlp without residual maps flattened inputs
// through W, b, so the MSE is a quadratic in (W, b).
ModelConfig linear_model() {
  ModelConfig m = default_model_config(ModelFamily::mlp);
  m.layers = 1;
  m.node_count = 2;
  m.residual_output = false;
  return m;
}

}  // namespace

TEST_SUITE("loss-surface") {
  TEST_CASE("directions match block norms") {
    const ModelConfig m = small_model(ModelFamily::gnn);
    ParamTree p = init_params(m, 1);
    Rng rng(7);
    for (const auto& e : p) {
      if (e.name.ends_with(".bias")) e.value.set_value(test::random_tensor(e.value.shape(), rng));
    }
    const DirectionPair d = sample_directions(p, 3);
    CHECK(d.warnings.empty());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double target = block_norm(p[k].value.value());
      CHECK(std::fabs(block_norm(d.d1[k]) - target) <= 1e-12);
      CHECK(std::fabs(block_norm(d.d2[k]) - target) <= 1e-12);
    }
  }

  TEST_CASE("zero blocks give zero directions with a warning") {
    const ModelConfig m = small_model(ModelFamily::gnn);
    const ParamTree p = init_params(m, 1);  // biases start at zero
    const DirectionPair d = sample_directions(p, 3);
    CHECK_FALSE(d.warnings.empty());
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k].name.ends_with(".bias")) {
        for (double v : d.d1[k].data()) CHECK(v == 0.0);
        for (double v : d.d2[k].data()) CHECK(v == 0.0);
      }
    }
  }

  TEST_CASE("directions from different seeds are nearly orthogonal") {
    const ParamTree p = init_params(default_model_config(ModelFamily::gnn), 2);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const DirectionPair a = sample_directions(p, s);
      const DirectionPair b = sample_directions(p, s + 100);
      CHECK(std::fabs(cosine(a.d1, b.d1)) < 0.2);
      CHECK(std::fabs(cosine(a.d1, a.d2)) < 0.2);
    }
    CHECK(sample_directions(p, 5).d1 == sample_directions(p, 5).d1);
  }

  TEST_CASE("center cell equals evaluate and params are untouched") {
    const ModelConfig m = small_model(ModelFamily::gnn);
    const ParamTree p = init_params(m, 4);
    const auto data = random_samples(6, 4, 1, 5);
    const DirectionPair d = sample_directions(p, 6);
    const auto before = p.values();
    const SurfaceGrid g = scan(m, p, data, d.d1, d.d2, 5, 0.5);
    CHECK(p.values() == before);
    CHECK(g.at(2, 2) == evaluate(m, p, data));
    CHECK(g.axis[2] == 0.0);
    CHECK(g.axis.front() == -0.5);
    CHECK(g.axis.back() == 0.5);
    CHECK(g.values.size() == 25);
    CHECK(g.overflow_count() == 0);
  }

  TEST_CASE("resolution one is the center loss") {
    const ModelConfig m = small_model(ModelFamily::gnn);
    const ParamTree p = init_params(m, 7);
    const auto data = random_samples(3, 4, 1, 8);
    const DirectionPair d = sample_directions(p, 9);
    const SurfaceGrid g = scan(m, p, data, d.d1, d.d2, 1, 1.0);
    REQUIRE(g.values.size() == 1);
    CHECK(g.values[0] == evaluate(m, p, data));
  }

  TEST_CASE("even resolution is rejected") {
    const ModelConfig m = small_model(ModelFamily::gnn);
    const ParamTree p = init_params(m, 7);
    const DirectionPair d = sample_directions(p, 9);
    CHECK_THROWS_AS((void)scan(m, p, random_samples(1, 4, 1, 1), d.d1, d.d2, 4, 1.0), ValidationError);
  }

  TEST_CASE("quadratic oracle") {
    const ModelConfig m = linear_model();
    Rng rng(10);
    ParamTree p = init_params(m, 11);
    for (const auto& e : p) e.value.set_value(test::random_tensor(e.value.shape(), rng, -0.5, 0.5));
    const auto data = random_samples(5, 2, 1, 12);
    const DirectionPair d = sample_directions(p, 13);
    const SurfaceGrid g = scan(m, p, data, d.d1, d.d2, 7, 1.0);

    // L(a, b) = mean |X (W + a D1w + b D2w) + (c + a D1c + b D2c) - Y|^2
    // = mean (r0 + a r1 + b r2)^2 with residual pieces built by hand.
    const Batch b = make_batch(centered(data));
    const std::size_t in = 2 * m.input_width();
    Tensor x({b.items, in});
    for (std::size_t i = 0; i < b.items; ++i) {
      for (std::size_t n = 0; n < 2; ++n) {
        const std::size_t r = i * 2 + n;
        for (std::size_t k = 0; k < 3; ++k) {
          x.at(i, n * m.input_width() + k) = b.positions.at(r, k);
          x.at(i, n * m.input_width() + 3 + k) = b.velocities.at(r, k);
        }
        x.at(i, n * m.input_width() + 6) = b.scalars.at(r, 0);
      }
    }
    auto affine = [&](const Tensor& w, const Tensor& c, std::size_t i, std::size_t o) {
      double s = c[o];
      for (std::size_t k = 0; k < in; ++k) s += x.at(i, k) * w.at(k, o);
      return s;
    };
    const Tensor& w0 = p[0].value.value();
    const Tensor& c0 = p[1].value.value();
    for (std::size_t ia = 0; ia < 7; ++ia) {
      for (std::size_t ib = 0; ib < 7; ++ib) {
        const double a = g.axis[ia];
        const double bb = g.axis[ib];
        double total = 0.0;
        for (std::size_t i = 0; i < b.items; ++i) {
          for (std::size_t o = 0; o < 6; ++o) {
            const double y = b.targets.at(i * 2 + o / 3, o % 3);
            const double r0 = affine(w0, c0, i, o) - y;
            const double r1 = affine(d.d1[0], d.d1[1], i, o);
            const double r2 = affine(d.d2[0], d.d2[1], i, o);
            const double r = r0 + a * r1 + bb * r2;
            total += r * r;
          }
        }
        const double expected = total / static_cast<double>(b.items * 6);
        CHECK(std::fabs(g.at(ia, ib) - expected) <= 1e-10);
      }
    }

    // The paraboloid is symmetric under negating both directions.
    Direction n1 = d.d1;
    Direction n2 = d.d2;
    for (auto& t : n1) for (double& v : t.data()) v = -v;
    for (auto& t : n2) for (double& v : t.data()) v = -v;
    const SurfaceGrid flipped = scan(m, p, data, n1, n2, 7, 1.0);
    for (std::size_t ia = 0; ia < 7; ++ia) {
      for (std::size_t ib = 0; ib < 7; ++ib) {
        CHECK(std::fabs(flipped.at(ia, ib) - g.at(6 - ia, 6 - ib)) <= 1e-10);
      }
    }
  }

  TEST_CASE("overflow cells are marked and the scan continues") {
    ParamTree p;
    p.add("w", Tensor::vector({1.0}));
    const Direction d1 = {Tensor::vector({1.0})};
    const Direction d2 = {Tensor::vector({0.0})};
    const auto loss = [](const ParamTree& t) {
      const double w = t[0].value.value()[0];
      if (w > 1.5) throw NumericError("overflow");
      return w < 0.75 ? std::numeric_limits<double>::infinity() : w * w;
    };
    const SurfaceGrid g = scan(loss, p, d1, d2, 5, 1.0);
    CHECK(g.overflow_count() == 15);
    CHECK(std::isinf(g.at(0, 0)));
    CHECK(g.at(2, 2) == 1.0);
    CHECK(std::isinf(g.at(4, 0)));
    CHECK(p[0].value.value()[0] == 1.0);
  }

  TEST_CASE("csv layout") {
    SurfaceGrid g;
    g.resolution = 3;
    g.range = 1.0;
    g.axis = {-1.0, 0.0, 1.0};
    g.values = {1, 2, 3, 4, 0.5, 6, 7, std::numeric_limits<double>::infinity(), 9};
    std::ostringstream os;
    g.write_csv(os);
    CHECK(os.str() == "a\\b,-1,0,1\n-1,1,2,3\n0,4,0.5,6\n1,7,inf,9\n");
  }
}

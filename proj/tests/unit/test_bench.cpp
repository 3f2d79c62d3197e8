#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "remul/bench.hpp"
#include "remul/errors.hpp"

using namespace remul;

namespace {

BenchConfig small_bench() {
  BenchConfig c;
  c.model = test::small_model(ModelFamily::gnn);
  c.batch_sizes = {1, 4};
  c.modes = {TrainMode::standard, TrainMode::constant, TrainMode::gradual, TrainMode::augment};
  c.repeats = 5;
  c.node_count = 5;
  return c;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("one row per mode, batch and phase") {
    const BenchConfig c = small_bench();
    const auto rows = run_bench(c);
    CHECK(rows.size() == c.modes.size() * c.batch_sizes.size() * 3);
    for (const TimingRow& r : rows) {
      CHECK(r.repeats == 5);
      CHECK_FALSE(r.oom);
      CHECK(r.mean_ms >= 0.0);
      CHECK(r.std_ms >= 0.0);
      CHECK(std::isfinite(r.checksum));
    }
  }

  TEST_CASE("checksums depend only on inputs") {
    const auto a = run_bench(small_bench());
    const auto b = run_bench(small_bench());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].checksum == b[i].checksum);
  }

  TEST_CASE("inference checksum is shared by every mode") {
    const auto rows = run_bench(small_bench());
    double reference = 0.0;
    bool have = false;
    for (const TimingRow& r : rows) {
      if (r.phase != BenchPhase::inference || r.batch_size != 4) continue;
      if (!have) {
        reference = r.checksum;
        have = true;
      }
      CHECK(r.checksum == reference);
    }
    CHECK(have);
  }

  TEST_CASE("per-item inference time does not grow with batch size") {
    BenchConfig c;
    c.model = test::small_model(ModelFamily::gnn);
    c.model.hidden_dim = 16;
    c.batch_sizes = {1, 64};
    c.modes = {TrainMode::standard};
    c.repeats = 20;
    c.warmup = 3;
    // Best of three harness runs, to keep scheduler noise out of the ratio.
    double one = INFINITY;
    double many = INFINITY;
    for (int run = 0; run < 3; ++run) {
      for (const TimingRow& r : run_bench(c)) {
        if (r.phase != BenchPhase::inference) continue;
        double& slot = r.batch_size == 1 ? one : many;
        slot = std::min(slot, r.mean_ms / static_cast<double>(r.batch_size));
      }
    }
    MESSAGE("per-item ms: batch 1 = ", one, ", batch 64 = ", many);
    INFO("per-item ms: batch 1 = ", one, ", batch 64 = ", many);
    CHECK(many <= 1.15 * one);
  }

  TEST_CASE("config validation") {
    BenchConfig c = small_bench();
    c.repeats = 4;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_bench();
    c.batch_sizes = {0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = small_bench();
    c.modes.clear();
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }

  TEST_CASE("synthetic items are deterministic") {
    const auto a = synthetic_items(3, 20, 4, 9);
    CHECK(a == synthetic_items(3, 20, 4, 9));
    CHECK(a.size() == 3);
    CHECK(a[0].node_count() == 20);
    CHECK(a[0].scalar_width == 4);
  }

  TEST_CASE("csv") {
    TimingRow r;
    r.mode = TrainMode::constant;
    r.batch_size = 64;
    r.phase = BenchPhase::forward_backward;
    r.mean_ms = 1.5;
    r.std_ms = 0.25;
    r.repeats = 10;
    r.checksum = 3.0;
    TimingRow oom = r;
    oom.oom = true;
    std::ostringstream os;
    write_bench_csv(os, {r, oom}, "desk, 1 core", 1);
    std::istringstream in(os.str());
    std::string header, line1, line2;
    std::getline(in, header);
    std::getline(in, line1);
    std::getline(in, line2);
    CHECK(header == bench_csv_header());
    CHECK(line1.starts_with("constant,64,forward_backward,1.5,0.25,10,3,1,"));
    CHECK(line1.find("desk") != std::string::npos);
    CHECK(line2.find("OOM") != std::string::npos);
  }
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "remul/models.hpp"
#include "remul/trainer.hpp"

namespace remul {

enum class BenchPhase { forward, forward_backward, inference };

std::string_view to_string(BenchPhase phase);

struct TimingRow {
  TrainMode mode = TrainMode::standard;
  std::size_t batch_size = 0;
  BenchPhase phase = BenchPhase::forward;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::size_t repeats = 0;
  bool oom = false;
  // Sum of the phase's outputs (losses, gradients or predictions); identical
  // on every repeat.
  double checksum = 0.0;
};

struct BenchConfig {
  ModelConfig model = default_model_config(ModelFamily::gnn);
  std::vector<std::size_t> batch_sizes{1, 64};
  std::vector<TrainMode> modes{TrainMode::standard, TrainMode::constant};
  std::size_t repeats = 10;
  std::size_t warmup = 2;
  std::size_t node_count = 20;
  std::size_t group_samples = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Synthetic standard-normal items: positions, velocities, model.scalar_width
/// scalars and targets per node.
std::vector<PointSample> synthetic_items(std::size_t count, std::size_t node_count, std::size_t scalar_width,
                                         std::uint64_t seed);

/// Times each (mode, batch, phase) on one thread. forward covers building the
/// mode's loss graphs; forward_backward adds the backward pass(es) and the
/// gradient combination, stopping short of the optimizer update; inference is
/// predict() with no graph. Warm-up runs are excluded from the statistics.
std::vector<TimingRow> run_bench(const BenchConfig& config);

std::string bench_csv_header();
void write_bench_csv(std::ostream& out, const std::vector<TimingRow>& rows, std::string_view hw_note,
                     std::size_t threads = 1);

}  // namespace remul

#include "remul/bench.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <new>
#include <optional>
#include <ostream>
#include <random>

#include "remul/errors.hpp"
#include "remul/format.hpp"

namespace remul {

namespace {

double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Runs `body` warmup + repeats times; `body` returns the checksum.
TimingRow time_phase(const BenchConfig& config, const std::function<double()>& body) {
  TimingRow row;
  row.repeats = config.repeats;
  std::vector<double> ms;
  ms.reserve(config.repeats);
  std::optional<double> checksum;
  for (std::size_t r = 0; r < config.warmup + config.repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const double c = body();
    const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!checksum) {
      checksum = c;
    } else if (std::bit_cast<std::uint64_t>(*checksum) != std::bit_cast<std::uint64_t>(c)) {
      throw NumericError("bench: output checksum changed between repeats");
    }
    if (r >= config.warmup) ms.push_back(elapsed);
  }
  row.checksum = *checksum;
  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= static_cast<double>(ms.size());
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  row.mean_ms = mean;
  row.std_ms = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
  return row;
}

}  // namespace

std::string_view to_string(BenchPhase phase) {
  switch (phase) {
    case BenchPhase::forward: return "forward";
    case BenchPhase::forward_backward: return "forward_backward";
    case BenchPhase::inference: return "inference";
  }
  return "?";
}

void BenchConfig::validate() const {
  model.validate();
  if (batch_sizes.empty() || modes.empty()) throw ValidationError("bench needs at least one batch size and mode");
  for (auto b : batch_sizes) {
    if (b == 0) throw ValidationError("batch sizes must be positive");
  }
  if (repeats < 5) throw ValidationError("bench repeats must be >= 5");
  if (node_count == 0) throw ValidationError("node_count must be positive");
  if (group_samples == 0) throw ValidationError("group_samples must be >= 1");
}

std::vector<PointSample> synthetic_items(std::size_t count, std::size_t node_count, std::size_t scalar_width,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto vec = [&] { return Vec3{normal(rng), normal(rng), normal(rng)}; };
  std::vector<PointSample> items(count);
  for (auto& x : items) {
    x.scalar_width = scalar_width;
    for (std::size_t i = 0; i < node_count; ++i) {
      x.positions.push_back(vec());
      x.velocities.push_back(vec());
      for (std::size_t k = 0; k < scalar_width; ++k) x.scalars.push_back(normal(rng));
      x.target_positions.push_back(vec());
    }
  }
  return items;
}

std::vector<TimingRow> run_bench(const BenchConfig& config) {
  config.validate();
  ModelConfig model = config.model;
  model.node_count = config.node_count;
  const ParamTree params = init_params(model, mix_seed(config.seed, 1));

  std::vector<TimingRow> rows;
  for (const TrainMode mode : config.modes) {
    TrainConfig tc;
    tc.mode = mode;
    tc.model = model;
    tc.group_samples = config.group_samples;
    const auto [alpha, beta] = tc.effective_weights();
    for (const std::size_t batch : config.batch_sizes) {
      const auto phases = {BenchPhase::forward, BenchPhase::forward_backward, BenchPhase::inference};
      for (const BenchPhase phase : phases) {
        TimingRow row;
        try {
          const auto items = synthetic_items(batch, config.node_count, model.scalar_width, mix_seed(config.seed, batch));
          const Rng rng0(mix_seed(config.seed, 0x6265));
          std::function<double()> body;
          switch (phase) {
            case BenchPhase::forward:
              body = [&] {
                RotationSampler sampler = RotationSampler::haar();
                Rng rng = rng0;
                const StepLosses l = build_step_losses(tc, params, items, sampler, rng);
                return l.l_obj.value().item() + (l.l_equi ? l.l_equi.value().item() : 0.0);
              };
              break;
            case BenchPhase::forward_backward:
              body = [&] {
                RotationSampler sampler = RotationSampler::haar();
                Rng rng = rng0;
                const StepLosses l = build_step_losses(tc, params, items, sampler, rng);
                const StepGradients g = compute_step_gradients(tc, params, l, alpha, beta);
                double s = 0.0;
                for (const auto& t : g.combined) s += sum_of(t.data());
                return s;
              };
              break;
            case BenchPhase::inference:
              body = [&] {
                const Batch b = make_batch(items);
                return sum_of(predict(model, params, b).data());
              };
              break;
          }
          row = time_phase(config, body);
        } catch (const std::bad_alloc&) {
          row = TimingRow{};
          row.oom = true;
          row.repeats = config.repeats;
          row.mean_ms = row.std_ms = std::numeric_limits<double>::quiet_NaN();
          row.checksum = std::numeric_limits<double>::quiet_NaN();
        }
        row.mode = mode;
        row.batch_size = batch;
        row.phase = phase;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string bench_csv_header() { return "mode,batch_size,phase,mean_ms,std_ms,repeats,checksum,threads,hw_note"; }

void write_bench_csv(std::ostream& out, const std::vector<TimingRow>& rows, std::string_view hw_note,
                     std::size_t threads) {
  std::string note(hw_note);
  for (char& c : note) {
    if (c == ',' || c == '\n' || c == '\r') c = ' ';
  }
  out << bench_csv_header() << '\n';
  for (const auto& r : rows) {
    out << to_string(r.mode) << ',' << r.batch_size << ',' << to_string(r.phase) << ',';
    if (r.oom) {
      out << "OOM,OOM";
    } else {
      out << format_double(r.mean_ms) << ',' << format_double(r.std_ms);
    }
    out << ',' << r.repeats << ',';
    if (r.oom) {
      out << "OOM";
    } else {
      out << format_double(r.checksum);
    }
    out << ',' << threads << ',' << note << '\n';
  }
}

}  // namespace remul

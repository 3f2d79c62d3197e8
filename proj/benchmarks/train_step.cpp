// Per-step costs by family and mode, plus inference. Batch size is the
// benchmark argument; node count is 20 as in the timing harness.

#include <benchmark/benchmark.h>

#include <vector>

#include "remul/bench.hpp"
#include "remul/models.hpp"
#include "remul/rotation.hpp"
#include "remul/trainer.hpp"

using namespace remul;

namespace {

constexpr std::size_t kNodes = 20;

void BM_Step(benchmark::State& state, ModelFamily family, TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.model = default_model_config(family);
  cfg.model.node_count = kNodes;
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  const auto items = synthetic_items(batch_size, kNodes, cfg.model.scalar_width, 1);
  const ParamTree params = init_params(cfg.model, 0);
  RotationSampler sampler = RotationSampler::haar();
  Rng rng(2);
  const auto [alpha, beta] = cfg.effective_weights();
  for (auto _ : state) {
    const StepLosses losses = build_step_losses(cfg, params, items, sampler, rng);
    const StepGradients g = compute_step_gradients(cfg, params, losses, alpha, beta);
    benchmark::DoNotOptimize(g.l_obj);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch_size));
}

void BM_Inference(benchmark::State& state, ModelFamily family) {
  ModelConfig m = default_model_config(family);
  m.node_count = kNodes;
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  const Batch batch = make_batch(synthetic_items(batch_size, kNodes, m.scalar_width, 3));
  const ParamTree params = init_params(m, 0);
  for (auto _ : state) {
    Tensor y = predict(m, params, batch);
    benchmark::DoNotOptimize(y);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch_size));
}

#define REMUL_STEP(fam, mode)                                                         \
  BENCHMARK_CAPTURE(BM_Step, fam##_##mode, ModelFamily::fam, TrainMode::mode)         \
      ->Arg(1)                                                                        \
      ->Arg(64)                                                                       \
      ->Unit(benchmark::kMillisecond)

REMUL_STEP(gnn, standard);
REMUL_STEP(gnn, constant);
REMUL_STEP(gnn, gradual);
REMUL_STEP(gnn, augment);
REMUL_STEP(transformer, standard);
REMUL_STEP(transformer, constant);
REMUL_STEP(egnn, standard);
REMUL_STEP(mlp, standard);
REMUL_STEP(mlp, constant);

BENCHMARK_CAPTURE(BM_Inference, gnn, ModelFamily::gnn)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Inference, transformer, ModelFamily::transformer)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

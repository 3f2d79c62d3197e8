#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "remul/autodiff.hpp"

namespace remul {

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Zero moments shaped like `params`.
  static AdamState for_params(const ParamTree& params);
};

// Bias-corrected Adam, applied block by block in ParamTree order.
void adam_step(const ParamTree& params, std::span<const Tensor> grads, AdamState& state, double lr);

}  // namespace remul

#include "remul/adam.hpp"

#include <cmath>

#include "remul/errors.hpp"

namespace remul {

AdamState AdamState::for_params(const ParamTree& params) {
  AdamState s;
  for (const auto& e : params) {
    s.first_moment.emplace_back(e.value.shape());
    s.second_moment.emplace_back(e.value.shape());
  }
  return s;
}

void adam_step(const ParamTree& params, std::span<const Tensor> grads, AdamState& state, double lr) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ValidationError("adam_step: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    const Shape& shape = params[b].value.shape();
    if (grads[b].shape() != shape || state.first_moment[b].shape() != shape ||
        state.second_moment[b].shape() != shape) {
      throw ValidationError("adam_step: shape mismatch in block '" + params[b].name + "'");
    }
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto w = params[b].value.mutable_data();
    auto g = grads[b].data();
    auto m = state.first_moment[b].data();
    auto v = state.second_moment[b].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace remul

#include "remul/gradnorm.hpp"

#include <algorithm>
#include <cmath>

#include "remul/errors.hpp"

namespace remul {

namespace {

double norm2(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void capture_initial(PenaltyState& state, double l_obj, double l_equi) {
  if (state.initialized()) throw ValidationError("initial losses already captured");
  if (!(l_obj > 0.0) || !(l_equi > 0.0)) throw ValidationError("initial losses must be positive");
  state.l_obj_initial = l_obj;
  state.l_equi_initial = l_equi;
}

GradNormStep gradnorm_step(PenaltyState& state, double l_obj, double l_equi, const Tensor& grad_obj_w,
                           const Tensor& grad_equi_w) {
  if (!state.initialized()) throw ValidationError("gradnorm_step before capture_initial");
  if (grad_obj_w.shape() != grad_equi_w.shape()) throw ValidationError("gradnorm_step: gradient shapes differ");

  GradNormStep out;
  const double n_obj = norm2(grad_obj_w);
  const double n_equi = norm2(grad_equi_w);
  if (n_obj == 0.0 && n_equi == 0.0) {
    out.status = GradNormStatus::zero_gradients;
    out.alpha_before_renorm = state.alpha;
    out.beta_before_renorm = state.beta;
    return out;
  }

  out.g_obj = state.alpha * n_obj;
  out.g_equi = state.beta * n_equi;
  const double rel_obj = l_obj / *state.l_obj_initial;
  const double rel_equi = l_equi / *state.l_equi_initial;
  out.g_mean = (out.g_obj + out.g_equi) / 2.0;
  const double r_mean = (rel_obj + rel_equi) / 2.0;
  const double r_alpha = rel_obj / r_mean;
  const double r_beta = rel_equi / r_mean;
  out.target_obj = out.g_mean * std::pow(r_alpha, state.gamma);
  out.target_equi = out.g_mean * std::pow(r_beta, state.gamma);
  out.balance_loss = std::fabs(out.g_obj - out.target_obj) + std::fabs(out.g_equi - out.target_equi);
  out.grad_alpha = sign(out.g_obj - out.target_obj) * n_obj;
  out.grad_beta = sign(out.g_equi - out.target_equi) * n_equi;

  double alpha = std::max(state.alpha - state.eta * out.grad_alpha, PenaltyState::kWeightFloor);
  double beta = std::max(state.beta - state.eta * out.grad_beta, PenaltyState::kWeightFloor);
  out.alpha_before_renorm = alpha;
  out.beta_before_renorm = beta;
  if (state.renormalize) {
    const double s = 2.0 / (alpha + beta);
    alpha = std::max(alpha * s, PenaltyState::kWeightFloor);
    beta = std::max(beta * s, PenaltyState::kWeightFloor);
  }
  state.alpha = alpha;
  state.beta = beta;
  return out;
}

}  // namespace remul

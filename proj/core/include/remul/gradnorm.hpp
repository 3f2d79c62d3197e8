#pragma once

#include <optional>

#include "remul/tensor.hpp"

namespace remul {

/// Adaptive task weights for L_total = alpha L_obj + beta L_equi.
struct PenaltyState {
  double alpha = 1.0;
  double beta = 1.0;
  double eta = 0.025;     // step size on the balancing loss
  double gamma = 1.5;     // asymmetry exponent on relative training rates
  bool renormalize = true;  // rescale so alpha + beta == 2 after each step
  std::optional<double> l_obj_initial;
  std::optional<double> l_equi_initial;

  static constexpr double kWeightFloor = 1e-4;

  bool initialized() const { return l_obj_initial.has_value(); }
};

/// Records L_obj(0) and L_equi(0). May be called once; both must be > 0.
void capture_initial(PenaltyState& state, double l_obj, double l_equi);

enum class GradNormStatus { updated, zero_gradients };

struct GradNormStep {
  GradNormStatus status = GradNormStatus::updated;
  double g_obj = 0.0;       // alpha * |grad_W L_obj|
  double g_equi = 0.0;      // beta  * |grad_W L_equi|
  double g_mean = 0.0;
  double target_obj = 0.0;  // mean G * r_alpha^gamma (held constant)
  double target_equi = 0.0;
  double balance_loss = 0.0;  // L_g
  double grad_alpha = 0.0;    // dL_g / dalpha
  double grad_beta = 0.0;
  double alpha_before_renorm = 0.0;
  double beta_before_renorm = 0.0;
};

/// One balancing step. `grad_obj_w` and `grad_equi_w` are gradients of the
/// unweighted losses with respect to the last-layer weights.
///
/// The targets are treated as constants, so dL_g/dalpha reduces to
/// sign(G_obj - target_obj) * |grad_obj_w| (and likewise for beta). Weights
/// are clamped to kWeightFloor, then optionally renormalized. When both
/// gradient norms are zero the state is left untouched.
GradNormStep gradnorm_step(PenaltyState& state, double l_obj, double l_equi, const Tensor& grad_obj_w,
                           const Tensor& grad_equi_w);

}  // namespace remul

#ifndef FPGLMM_EM_HPP
#define FPGLMM_EM_HPP

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "fpglmm/likelihood.hpp"

namespace fpglmm {

struct EmControls {
  int max_em_iters = 200;
  double rel_obj_tol = 1e-8;  // relative change of the observed EM objective
  double tau_step_tol = 1e-6; // sup-norm change of tau between EM iterations
  int max_newton_iters = 60;
  // Absolute M-step gradient tolerance is newton_tol_scale * (1 + total_y),
  // which keeps it meaningful across dataset sizes.
  double newton_tol_scale = 1e-8;
  int max_halvings = 30;
  double fd_rel_step = 1e-4; // relative step for b_hat sensitivities
  double mode_tol = 1e-8;
  int mode_max_iter = 100;
  // Coordinates of tau allowed to move; empty = all free. Used by
  // constrained fits and tests pinning sigma^2.
  std::vector<bool> free_mask;
};

struct EmState {
  Tau tau_k;
  std::vector<Counts4> expected_counts;
  double objective_k = 0.0; // -g(tau_k, b_hat(tau_k))
  int iteration = 0;
  Eigen::VectorXd b_hat_k; // warm start for the next inner solve
};

struct FitResult {
  Tau tau_hat;
  Eigen::MatrixXd tau_hessian; // d^2 g(tau, b_hat(tau)) / d tau^2 at tau_hat
  int em_iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace; // observed EM objective per iteration
  std::vector<std::string> warnings;
  QualityScheme scheme;
};

// Multinomial E-step: expected per-channel counts y * p^{(u,v)}.
std::vector<Counts4> e_step(const Tau& tau, const MatchDataset& data);

// EM surrogate g_c(tau, b) for fixed expected counts (factorial terms of the
// complete likelihood dropped; they are constant in tau).
double gc_value(const Tau& tau, const Eigen::VectorXd& b, std::span<const Counts4> counts,
                const MatchDataset& data);

// All derivatives of the surrogate needed by the Newton M-step.
struct GcDerivs {
  double value = 0.0;
  Eigen::VectorXd grad_tau;  // explicit partials, p+1
  Eigen::MatrixXd hess_tau;  // explicit partials, (p+1)x(p+1)
  Eigen::MatrixXd cross;     // d^2 g_c / dtau db, (p+1) x F
  Eigen::VectorXd grad_b;    // F (vanishes at b_hat)
};
GcDerivs gc_derivatives(const Tau& tau, const Eigen::VectorXd& b,
                        std::span<const Counts4> counts, const MatchDataset& data);

// Central-difference derivatives of the inner mode with respect to tau,
// warm-started from the unperturbed mode. first is F x (p+1); second_diag
// holds the per-coordinate second directional derivatives.
struct BhatSensitivities {
  Eigen::MatrixXd first;
  Eigen::MatrixXd second_diag;
};
BhatSensitivities bhat_sensitivities(const Tau& tau, const MatchDataset& data,
                                     double rel_step = 1e-4,
                                     const ModeResult* center = nullptr);

// Gradient of the M-step objective tau -> g_c(tau, b_hat(tau)), combining the
// explicit partials with the chain term through the numerically
// differentiated mode.
Eigen::VectorXd gc_total_grad(const Tau& tau, const MatchDataset& data,
                              std::span<const Counts4> counts, const EmControls& controls = {});

// One Newton M-step run to its own convergence; returns tau_{k+1}.
Tau m_step(const EmState& state, const MatchDataset& data, const EmControls& controls = {});

// Moment-matched default start: beta0 from the aggregate rate, small negative
// quality effects, log sigma^2 = -4.
Tau default_init(const MatchDataset& data);

// Full EM fit with the curvature matrix evaluated at tau_hat.
FitResult fit(const MatchDataset& data, std::optional<Tau> init = std::nullopt,
              const EmControls& controls = {});

} // namespace fpglmm

#endif

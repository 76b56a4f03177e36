#ifndef FPGLMM_LIKELIHOOD_HPP
#define FPGLMM_LIKELIHOOD_HPP

#include <Eigen/Core>
#include <array>
#include <span>

#include "fpglmm/dataset.hpp"
#include "fpglmm/model.hpp"

namespace fpglmm {

// Per-pair four-way counts, channel order as in model.hpp. Fractional values
// are allowed so the same code serves the EM expected counts.
using Counts4 = std::array<double, 4>;

// Result of the inner random-effects optimization for fixed tau.
struct ModeResult {
  Eigen::VectorXd b_hat;
  Eigen::MatrixXd hessian; // d^2 g / db^2 at b_hat, F x F, SPD
  double grad_norm = 0.0;  // sup norm at exit
  int iterations = 0;
  bool sigma_clamped = false;
};

struct LaplaceResult {
  double log_lik = 0.0; // term_a + term_b
  double term_a = 0.0;  // -g(tau, b_hat)
  double term_b = 0.0;  // -1/2 log det(hessian / 2pi)
  ModeResult mode;
};

// Negative log-likelihood of the complete (four-way split) data. Each pair's
// counts must sum to its observed y.
double neg_log_complete(const FixedEffects& theta, const Eigen::VectorXd& b,
                        std::span<const Counts4> counts, const MatchDataset& data);

// Negative log-likelihood of the observed totals after the multinomial
// collapse of the four channels.
double neg_log_observed(const FixedEffects& theta, const Eigen::VectorXd& b,
                        const MatchDataset& data);

// g(tau,b) = neg_log_observed + b'b/(2 sigma^2) + (F/2)(log sigma^2 + log 2pi).
// log sigma^2 is clamped to >= -30 so the prior term stays finite;
// clamped is set when that triggers.
double g_objective(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data,
                   bool* clamped = nullptr);

Eigen::VectorXd g_grad_b(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data);
Eigen::MatrixXd g_hess_b(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data);

// Explicit partials of g with respect to (theta..., beta0, log_sigma2) at
// fixed b. At b = b_hat(tau) these are the exact total derivatives of
// g(tau, b_hat(tau)) because the inner gradient vanishes there.
Eigen::VectorXd g_grad_tau(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data);

// Newton minimization of g(tau, .) over b. Deterministic: fixed start
// (b0 or zeros), exact Hessian, Cholesky solves, step-halving safeguard.
ModeResult find_mode(const Tau& tau, const MatchDataset& data, double tol = 1e-8,
                     int max_iter = 100, const Eigen::VectorXd* b0 = nullptr);

// Laplace approximation of the marginal log-likelihood.
LaplaceResult laplace_loglik(const Tau& tau, const MatchDataset& data,
                             const Eigen::VectorXd* warm_start = nullptr);

// Dense tensor-grid integration of exp(-g) over b, centered at the mode and
// spanning +-span_sds posterior standard deviations per axis. Exact-oracle
// companion to laplace_loglik; refuses F > 4.
double quadrature_loglik(const Tau& tau, const MatchDataset& data, int nodes_per_axis = 101,
                         double span_sds = 8.0);

} // namespace fpglmm

#endif

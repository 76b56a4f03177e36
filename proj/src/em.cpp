#include "fpglmm/em.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"

namespace fpglmm {

namespace {

constexpr double kLogSigma2Floor = -30.0;

double effective_s(const Tau& tau) { return std::max(tau.log_sigma2, kLogSigma2Floor); }

std::vector<bool> resolve_mask(const EmControls& controls, int dim) {
  if (controls.free_mask.empty()) return std::vector<bool>(dim, true);
  if (static_cast<int>(controls.free_mask.size()) != dim) {
    throw InputError("free_mask length does not match parameter dimension");
  }
  return controls.free_mask;
}

void check_counts(std::span<const Counts4> counts, const MatchDataset& data) {
  if (counts.size() != data.pairs.size()) {
    throw InputError("expected-counts table does not match the dataset");
  }
}

} // namespace

std::vector<Counts4> e_step(const Tau& tau, const MatchDataset& data) {
  if (data.pairs.empty()) throw InputError("e_step: empty dataset");
  EtaCalc calc(tau.fixed, data.scheme);
  std::vector<Counts4> counts(data.pairs.size());
  double e[4];
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    calc.etas(p.q_a, p.q_b, e);
    const double lse = log_sum_exp4(e);
    const double y = static_cast<double>(p.y);
    for (int ch = 0; ch < kChannels; ++ch) counts[i][ch] = y * std::exp(e[ch] - lse);
  }
  return counts;
}

double gc_value(const Tau& tau, const Eigen::VectorXd& b, std::span<const Counts4> counts,
                const MatchDataset& data) {
  check_counts(counts, data);
  EtaCalc calc(tau.fixed, data.scheme);
  double total = 0.0;
  double e[4];
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    calc.etas(p.q_a, p.q_b, e);
    const double zb = b[p.finger_index_a] + b[p.finger_index_b];
    for (int ch = 0; ch < kChannels; ++ch) {
      const double lin = e[ch] + zb + p.log_mm;
      total += std::exp(lin) - lin * counts[i][ch];
    }
  }
  const double s = effective_s(tau);
  const double f = static_cast<double>(data.finger_count);
  return total + 0.5 * std::exp(-s) * b.squaredNorm() + 0.5 * f * (s + kLogTwoPi);
}

GcDerivs gc_derivatives(const Tau& tau, const Eigen::VectorXd& b,
                        std::span<const Counts4> counts, const MatchDataset& data) {
  check_counts(counts, data);
  const int p = data.scheme.fixed_dim();
  const int f = data.finger_count;
  GcDerivs d;
  d.grad_tau = Eigen::VectorXd::Zero(p + 1);
  d.hess_tau = Eigen::MatrixXd::Zero(p + 1, p + 1);
  d.cross = Eigen::MatrixXd::Zero(p + 1, f);
  d.grad_b = Eigen::VectorXd::Zero(f);

  EtaCalc calc(tau.fixed, data.scheme);
  std::vector<double> rows(4 * static_cast<std::size_t>(p));
  double e[4];
  double total = 0.0;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& pr = data.pairs[i];
    const int fa = pr.finger_index_a;
    const int fb = pr.finger_index_b;
    calc.etas(pr.q_a, pr.q_b, e);
    const double zb = b[fa] + b[fb];
    fill_design_rows(data.scheme, pr.q_a, pr.q_b, rows.data());
    for (int ch = 0; ch < kChannels; ++ch) {
      const double lin = e[ch] + zb + pr.log_mm;
      const double lam = std::exp(lin);
      const double c = counts[i][ch];
      total += lam - lin * c;
      const double coef = lam - c;
      const double* row = rows.data() + static_cast<std::size_t>(ch) * p;
      for (int r = 0; r < p; ++r) {
        d.grad_tau[r] += coef * row[r];
        for (int t = r; t < p; ++t) d.hess_tau(r, t) += lam * row[r] * row[t];
        d.cross(r, fa) += lam * row[r];
        d.cross(r, fb) += lam * row[r];
      }
      d.grad_b[fa] += coef;
      d.grad_b[fb] += coef;
    }
  }
  for (int r = 0; r < p; ++r) {
    for (int t = 0; t < r; ++t) d.hess_tau(r, t) = d.hess_tau(t, r);
  }
  const double s = effective_s(tau);
  const double inv_s2 = std::exp(-s);
  const double bb = b.squaredNorm();
  d.value = total + 0.5 * inv_s2 * bb + 0.5 * static_cast<double>(f) * (s + kLogTwoPi);
  d.grad_tau[p] = -0.5 * inv_s2 * bb + 0.5 * static_cast<double>(f);
  d.hess_tau(p, p) = 0.5 * inv_s2 * bb;
  d.cross.row(p) = (-inv_s2) * b.transpose();
  d.grad_b += inv_s2 * b;
  return d;
}

BhatSensitivities bhat_sensitivities(const Tau& tau, const MatchDataset& data, double rel_step,
                                     const ModeResult* center) {
  const int dim = tau.dim();
  const int f = data.finger_count;
  ModeResult base;
  if (center) {
    base = *center;
  } else {
    base = find_mode(tau, data);
  }
  BhatSensitivities out;
  out.first.resize(f, dim);
  out.second_diag.resize(f, dim);
  const auto names = tau_component_names(data.scheme);
  Eigen::VectorXd stacked = tau.stacked();
  for (int i = 0; i < dim; ++i) {
    const double h = rel_step * (1.0 + std::fabs(stacked[i]));
    Eigen::VectorXd up = stacked, dn = stacked;
    up[i] += h;
    dn[i] -= h;
    try {
      const ModeResult mu =
          find_mode(Tau::from_stacked(up, data.scheme), data, 1e-8, 100, &base.b_hat);
      const ModeResult md =
          find_mode(Tau::from_stacked(dn, data.scheme), data, 1e-8, 100, &base.b_hat);
      out.first.col(i) = (mu.b_hat - md.b_hat) / (2.0 * h);
      out.second_diag.col(i) = (mu.b_hat - 2.0 * base.b_hat + md.b_hat) / (h * h);
    } catch (const NumericalError& err) {
      throw NumericalError("bhat_sensitivities: mode solve failed while perturbing " + names[i] +
                           ": " + err.what());
    }
  }
  return out;
}

Eigen::VectorXd gc_total_grad(const Tau& tau, const MatchDataset& data,
                              std::span<const Counts4> counts, const EmControls& controls) {
  const ModeResult mode = find_mode(tau, data, controls.mode_tol, controls.mode_max_iter);
  const GcDerivs d = gc_derivatives(tau, mode.b_hat, counts, data);
  const BhatSensitivities sens = bhat_sensitivities(tau, data, controls.fd_rel_step, &mode);
  return d.grad_tau + sens.first.transpose() * d.grad_b;
}

namespace {

struct MStepResult {
  Tau tau;
  ModeResult mode;
};

MStepResult m_step_impl(const Tau& tau0, std::span<const Counts4> counts,
                        const MatchDataset& data, const EmControls& controls,
                        const Eigen::VectorXd* warm_b) {
  const int dim = tau0.dim();
  const auto mask = resolve_mask(controls, dim);
  int free_count = 0;
  for (bool m : mask) free_count += m ? 1 : 0;
  if (free_count == 0) throw InputError("m_step: no free parameters");

  double total_counts = 0.0;
  for (const Counts4& c : counts) total_counts += c[0] + c[1] + c[2] + c[3];
  if (total_counts <= 0.0) {
    throw ModelError("m_step: expected counts are all zero; the objective diverges toward "
                     "-inf in beta0 (no finite optimum)");
  }
  const double grad_tol =
      controls.newton_tol_scale * (1.0 + static_cast<double>(data.total_matches()));

  Eigen::VectorXd stacked = tau0.stacked();
  const Eigen::VectorXd start = stacked;
  Tau tau = tau0;
  ModeResult mode = find_mode(tau, data, controls.mode_tol, controls.mode_max_iter, warm_b);
  GcDerivs d = gc_derivatives(tau, mode.b_hat, counts, data);

  // The variance coordinate lives on the box log sigma^2 >= kLogSigma2Floor:
  // datasets whose profile MLE of sigma^2 is zero pin it at the floor
  // (projected Newton) instead of chasing -inf.
  const int s_index = dim - 1;
  bool reached_tol = false;
  for (int it = 0; it < controls.max_newton_iters; ++it) {
    const BhatSensitivities sens = bhat_sensitivities(tau, data, controls.fd_rel_step, &mode);
    Eigen::VectorXd grad_full = d.grad_tau + sens.first.transpose() * d.grad_b;
    Eigen::MatrixXd hess_full = d.hess_tau + d.cross * sens.first;
    hess_full = 0.5 * (hess_full + hess_full.transpose()).eval();
    const bool s_pinned =
        mask[s_index] && stacked[s_index] <= kLogSigma2Floor + 1e-9 && grad_full[s_index] > 0.0;
    if (s_pinned) grad_full[s_index] = 0.0;

    Eigen::VectorXd grad(free_count);
    Eigen::MatrixXd hess(free_count, free_count);
    for (int r = 0, ri = 0; r < dim; ++r) {
      if (!mask[r]) continue;
      grad[ri] = grad_full[r];
      for (int c = 0, ci = 0; c < dim; ++c) {
        if (!mask[c]) continue;
        hess(ri, ci) = hess_full(r, c);
        ++ci;
      }
      ++ri;
    }
    if (grad.lpNorm<Eigen::Infinity>() <= grad_tol) {
      reached_tol = true;
      break;
    }

    // The profile objective is not jointly convex in log sigma^2, so the
    // Hessian can be indefinite away from the optimum. Floor the eigenvalues
    // to keep a descent direction; a system with no positive curvature at all
    // is a genuine failure.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw NumericalError(
          "m_step: Newton system singular (eigenvalue range [" + std::to_string(lo) + ", " +
          std::to_string(hi) + "], condition " + std::to_string(hi / std::fabs(lo)) + ")");
    }
    const double floor = std::max(1e-10 * hi, 1e-12);
    const Eigen::VectorXd safe_eigs = eig.eigenvalues().cwiseMax(floor);
    Eigen::VectorXd step_free =
        eig.eigenvectors() *
        (eig.eigenvectors().transpose() * (-grad)).cwiseQuotient(safe_eigs);
    // Cap the step so floored directions cannot fling the iterate; the pure
    // Newton step is untouched whenever it is already modest.
    const double step_norm = step_free.lpNorm<Eigen::Infinity>();
    if (step_norm > 2.0) step_free *= 2.0 / step_norm;

    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h <= controls.max_halvings; ++h) {
      Eigen::VectorXd cand = stacked;
      for (int r = 0, ri = 0; r < dim; ++r) {
        if (mask[r]) cand[r] += alpha * step_free[ri++];
      }
      if (mask[s_index]) cand[s_index] = std::max(cand[s_index], kLogSigma2Floor);
      Tau tau_cand = Tau::from_stacked(cand, data.scheme);
      ModeResult mode_cand;
      try {
        mode_cand =
            find_mode(tau_cand, data, controls.mode_tol, controls.mode_max_iter, &mode.b_hat);
      } catch (const NumericalError&) {
        alpha *= 0.5;
        continue;
      }
      GcDerivs d_cand = gc_derivatives(tau_cand, mode_cand.b_hat, counts, data);
      if (d_cand.value <= d.value + 1e-12 * (1.0 + std::fabs(d.value))) {
        stacked = std::move(cand);
        tau = std::move(tau_cand);
        mode = std::move(mode_cand);
        d = std::move(d_cand);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw NumericalError("m_step: no objective decrease after " +
                           std::to_string(controls.max_halvings) + " halvings");
    }
  }
  if (!reached_tol) {
    // A long one-way drift of the fixed effects means the surrogate has no
    // finite optimum (typically vanishing counts); anything else is a solver
    // failure. The boxed variance coordinate is allowed its run to the floor.
    if ((stacked - start).head(dim - 1).lpNorm<Eigen::Infinity>() > 5.0) {
      throw ModelError("m_step: parameter drifting toward the boundary (no finite optimum)");
    }
    throw NumericalError("m_step: Newton did not reach the gradient tolerance in " +
                         std::to_string(controls.max_newton_iters) + " iterations");
  }
  return {tau, mode};
}

} // namespace

Tau m_step(const EmState& state, const MatchDataset& data, const EmControls& controls) {
  const Eigen::VectorXd* warm = state.b_hat_k.size() == data.finger_count ? &state.b_hat_k
                                                                          : nullptr;
  return m_step_impl(state.tau_k, state.expected_counts, data, controls, warm).tau;
}

Tau default_init(const MatchDataset& data) {
  if (data.pairs.empty()) throw InputError("default_init: empty dataset");
  const long total = data.total_matches();
  if (total <= 0) throw ModelError("default_init: all match counts are zero (no finite MLE)");
  double mean_y = static_cast<double>(total) / static_cast<double>(data.pairs.size());
  double mean_mm = 0.0;
  for (const PairObs& p : data.pairs) {
    mean_mm += static_cast<double>(p.m_a) * static_cast<double>(p.m_b);
  }
  mean_mm /= static_cast<double>(data.pairs.size());
  Tau tau;
  tau.fixed.theta = Eigen::VectorXd::Constant(data.scheme.theta_dim(), -0.5);
  tau.fixed.beta0 = 0.5 * std::log(mean_y / mean_mm);
  tau.log_sigma2 = -4.0;
  return tau;
}

FitResult fit(const MatchDataset& data, std::optional<Tau> init, const EmControls& controls) {
  if (data.finger_count < 2) throw InputError("fit: need at least two fingers");
  if (data.total_matches() <= 0) {
    throw ModelError("fit: all match counts are zero (no finite MLE)");
  }
  Tau tau = init ? *init : default_init(data);
  if (tau.fixed.dim() != data.scheme.fixed_dim()) {
    throw InputError("fit: initial tau does not match the quality scheme");
  }

  FitResult result;
  result.scheme = data.scheme;

  ModeResult mode = find_mode(tau, data, controls.mode_tol, controls.mode_max_iter);
  bool clamp_warned = mode.sigma_clamped;
  double obj = -g_objective(tau, mode.b_hat, data);
  result.objective_trace.push_back(obj);

  bool converged = false;
  int k = 0;
  for (; k < controls.max_em_iters; ++k) {
    EmState state;
    state.tau_k = tau;
    state.expected_counts = e_step(tau, data);
    state.iteration = k;
    state.b_hat_k = mode.b_hat;

    MStepResult ms = m_step_impl(state.tau_k, state.expected_counts, data, controls,
                                 &state.b_hat_k);
    bool clamped = false;
    const double obj_next = -g_objective(ms.tau, ms.mode.b_hat, data, &clamped);
    clamp_warned = clamp_warned || clamped || ms.mode.sigma_clamped;
    result.objective_trace.push_back(obj_next);

    const double dtau = (ms.tau.stacked() - tau.stacked()).lpNorm<Eigen::Infinity>();
    const double rel = std::fabs(obj_next - obj) / (1.0 + std::fabs(obj_next));
    if (obj_next < obj - 1e-8 * (1.0 + std::fabs(obj))) {
      result.warnings.push_back("EM objective decreased at iteration " + std::to_string(k));
    }
    tau = ms.tau;
    mode = ms.mode;
    obj = obj_next;
    if (rel <= controls.rel_obj_tol && dtau <= controls.tau_step_tol) {
      converged = true;
      ++k;
      break;
    }
  }
  result.tau_hat = tau;
  result.em_iterations = k;
  result.converged = converged;
  if (!converged) {
    result.warnings.push_back("EM did not converge within " +
                              std::to_string(controls.max_em_iters) + " iterations");
  }
  if (clamp_warned) {
    result.warnings.push_back("log sigma^2 was clamped at the lower floor during fitting");
  }
  if (tau.log_sigma2 <= kLogSigma2Floor + 1e-9) {
    result.warnings.push_back(
        "variance component estimated at the lower boundary (sigma^2 ~ 0)");
  }
  for (int r = 0; r < tau.fixed.theta.size(); ++r) {
    if (tau.fixed.theta[r] >= 0.0) {
      result.warnings.push_back("fitted theta" + std::to_string(r) + " is nonnegative");
    }
  }
  if (tau.fixed.beta0 >= 0.0) result.warnings.push_back("fitted beta0 is nonnegative");

  // Curvature of tau -> g(tau, b_hat(tau)) by central differences of the
  // analytic tau-gradient; the inner gradient vanishes at the mode, so the
  // explicit partials are the exact total derivative.
  const int dim = tau.dim();
  Eigen::VectorXd stacked = tau.stacked();
  Eigen::MatrixXd hess(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const double h = controls.fd_rel_step * (1.0 + std::fabs(stacked[i]));
    Eigen::VectorXd up = stacked, dn = stacked;
    up[i] += h;
    dn[i] -= h;
    const Tau tu = Tau::from_stacked(up, data.scheme);
    const Tau td = Tau::from_stacked(dn, data.scheme);
    const ModeResult mu = find_mode(tu, data, controls.mode_tol, controls.mode_max_iter,
                                    &mode.b_hat);
    const ModeResult md = find_mode(td, data, controls.mode_tol, controls.mode_max_iter,
                                    &mode.b_hat);
    hess.col(i) = (g_grad_tau(tu, mu.b_hat, data) - g_grad_tau(td, md.b_hat, data)) / (2.0 * h);
  }
  result.tau_hessian = 0.5 * (hess + hess.transpose());
  return result;
}

} // namespace fpglmm

#include "fpglmm/likelihood.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"
#include "fpglmm/parallel.hpp"

namespace fpglmm {

namespace {

constexpr double kLogSigma2Floor = -30.0;

double clamped_log_sigma2(const Tau& tau, bool* clamped) {
  if (tau.log_sigma2 < kLogSigma2Floor) {
    if (clamped) *clamped = true;
    return kLogSigma2Floor;
  }
  return tau.log_sigma2;
}

// Solvers need a proper design; plain likelihood values tolerate empty data
// (empty sums).
void require_pairs(const MatchDataset& data) {
  if (data.pairs.empty()) throw InputError("dataset has no impostor pairs");
  if (data.finger_count < 2) throw InputError("dataset spans fewer than two fingers");
}

void require_b_dim(const Eigen::VectorXd& b, const MatchDataset& data) {
  if (b.size() != data.finger_count) {
    throw InputError("random-effects vector length " + std::to_string(b.size()) +
                     " != finger count " + std::to_string(data.finger_count));
  }
}

// H_ij(theta), cached once per theta since it is constant across b updates.
std::vector<double> pair_lse(const FixedEffects& theta, const MatchDataset& data) {
  EtaCalc calc(theta, data.scheme);
  std::vector<double> lse(data.pairs.size());
  double e[4];
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    calc.etas(p.q_a, p.q_b, e);
    lse[i] = log_sum_exp4(e);
  }
  return lse;
}

double h1_value(double log_sigma2, const Eigen::VectorXd& b) {
  const double inv_s2 = std::exp(-log_sigma2);
  const double f = static_cast<double>(b.size());
  return 0.5 * inv_s2 * b.squaredNorm() + 0.5 * f * (log_sigma2 + kLogTwoPi);
}

// h(theta,b) given cached lse values.
double h_value(const std::vector<double>& lse, const Eigen::VectorXd& b,
               const MatchDataset& data) {
  double h = 0.0;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    const double zb = b[p.finger_index_a] + b[p.finger_index_b];
    const double y = static_cast<double>(p.y);
    h += std::exp(p.log_mm + zb + lse[i]) - (lse[i] + zb + p.log_mm) * y +
         log_factorial(y);
  }
  return h;
}

} // namespace

double neg_log_complete(const FixedEffects& theta, const Eigen::VectorXd& b,
                        std::span<const Counts4> counts, const MatchDataset& data) {
  require_b_dim(b, data);
  if (data.pairs.empty()) return 0.0;
  if (counts.size() != data.pairs.size()) {
    throw InputError("counts table has " + std::to_string(counts.size()) + " rows, dataset has " +
                     std::to_string(data.pairs.size()));
  }
  EtaCalc calc(theta, data.scheme);
  double total = 0.0;
  double e[4];
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    const Counts4& c = counts[i];
    double sum_c = 0.0;
    for (double cv : c) {
      if (cv < 0.0) throw InputError("negative channel count");
      sum_c += cv;
    }
    if (std::fabs(sum_c - static_cast<double>(p.y)) > 1e-8 * (1.0 + static_cast<double>(p.y))) {
      throw InputError("channel counts do not sum to the pair's match count");
    }
    calc.etas(p.q_a, p.q_b, e);
    const double zb = b[p.finger_index_a] + b[p.finger_index_b];
    for (int ch = 0; ch < kChannels; ++ch) {
      const double lin = e[ch] + zb + p.log_mm;
      total += std::exp(lin) - lin * c[ch] + log_factorial(c[ch]);
    }
  }
  return total;
}

double neg_log_observed(const FixedEffects& theta, const Eigen::VectorXd& b,
                        const MatchDataset& data) {
  require_b_dim(b, data);
  if (data.pairs.empty()) return 0.0;
  return h_value(pair_lse(theta, data), b, data);
}

double g_objective(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data,
                   bool* clamped) {
  const double s = clamped_log_sigma2(tau, clamped);
  return neg_log_observed(tau.fixed, b, data) + h1_value(s, b);
}

Eigen::VectorXd g_grad_b(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data) {
  require_b_dim(b, data);
  const double s = clamped_log_sigma2(tau, nullptr);
  const auto lse = pair_lse(tau.fixed, data);
  Eigen::VectorXd grad = std::exp(-s) * b;
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    const double t =
        std::exp(p.log_mm + b[p.finger_index_a] + b[p.finger_index_b] + lse[i]);
    const double d = t - static_cast<double>(p.y);
    grad[p.finger_index_a] += d;
    grad[p.finger_index_b] += d;
  }
  return grad;
}

Eigen::MatrixXd g_hess_b(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data) {
  require_b_dim(b, data);
  const double s = clamped_log_sigma2(tau, nullptr);
  const auto lse = pair_lse(tau.fixed, data);
  const int f = data.finger_count;
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(f, f);
  hess.diagonal().setConstant(std::exp(-s));
  for (std::size_t i = 0; i < data.pairs.size(); ++i) {
    const PairObs& p = data.pairs[i];
    const int fa = p.finger_index_a;
    const int fb = p.finger_index_b;
    const double t = std::exp(p.log_mm + b[fa] + b[fb] + lse[i]);
    hess(fa, fa) += t;
    hess(fb, fb) += t;
    hess(fa, fb) += t;
    hess(fb, fa) += t;
  }
  return hess;
}

Eigen::VectorXd g_grad_tau(const Tau& tau, const Eigen::VectorXd& b, const MatchDataset& data) {
  require_b_dim(b, data);
  const int p = data.scheme.fixed_dim();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
  EtaCalc calc(tau.fixed, data.scheme);
  std::vector<double> rows(4 * static_cast<std::size_t>(p));
  double e[4];
  for (const PairObs& pr : data.pairs) {
    calc.etas(pr.q_a, pr.q_b, e);
    const double lse = log_sum_exp4(e);
    const double zb = b[pr.finger_index_a] + b[pr.finger_index_b];
    const double eb = std::exp(pr.log_mm + zb);
    const double y = static_cast<double>(pr.y);
    fill_design_rows(data.scheme, pr.q_a, pr.q_b, rows.data());
    for (int ch = 0; ch < kChannels; ++ch) {
      const double lam = eb * std::exp(e[ch]);
      const double prob = std::exp(e[ch] - lse);
      const double coef = lam - y * prob;
      const double* row = rows.data() + static_cast<std::size_t>(ch) * p;
      for (int r = 0; r < p; ++r) grad[r] += coef * row[r];
    }
  }
  const double s = clamped_log_sigma2(tau, nullptr);
  grad[p] = -0.5 * std::exp(-s) * b.squaredNorm() + 0.5 * static_cast<double>(data.finger_count);
  return grad;
}

ModeResult find_mode(const Tau& tau, const MatchDataset& data, double tol, int max_iter,
                     const Eigen::VectorXd* b0) {
  require_pairs(data);
  if (!(tol > 0.0)) throw InputError("find_mode: tolerance must be positive");
  const int f = data.finger_count;
  bool clamped = false;
  const double s = clamped_log_sigma2(tau, &clamped);
  const double inv_s2 = std::exp(-s);
  const auto lse = pair_lse(tau.fixed, data);

  Eigen::VectorXd b = b0 ? *b0 : Eigen::VectorXd::Zero(f);
  if (b0) require_b_dim(*b0, data);

  // g up to a b-independent constant; enough for the line search.
  auto partial_g = [&](const Eigen::VectorXd& bv) {
    double val = 0.5 * inv_s2 * bv.squaredNorm();
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
      const PairObs& p = data.pairs[i];
      const double zb = bv[p.finger_index_a] + bv[p.finger_index_b];
      val += std::exp(p.log_mm + zb + lse[i]) - zb * static_cast<double>(p.y);
    }
    return val;
  };

  Eigen::VectorXd grad(f);
  Eigen::MatrixXd hess(f, f);
  double g_cur = partial_g(b);
  ModeResult result;
  result.sigma_clamped = clamped;

  for (int iter = 0; iter < max_iter; ++iter) {
    grad = inv_s2 * b;
    hess.setZero();
    hess.diagonal().setConstant(inv_s2);
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
      const PairObs& p = data.pairs[i];
      const int fa = p.finger_index_a;
      const int fb = p.finger_index_b;
      const double t = std::exp(p.log_mm + b[fa] + b[fb] + lse[i]);
      const double d = t - static_cast<double>(p.y);
      grad[fa] += d;
      grad[fb] += d;
      hess(fa, fa) += t;
      hess(fb, fb) += t;
      hess(fa, fb) += t;
      hess(fb, fa) += t;
    }
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= tol) {
      result.b_hat = b;
      result.hessian = hess;
      result.grad_norm = gnorm;
      result.iterations = iter;
      return result;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("find_mode: Cholesky failed on the inner Hessian");
    }
    Eigen::VectorXd step = llt.solve(-grad);
    // g is strictly convex in b, so halving always finds a decrease.
    double alpha = 1.0;
    for (int h = 0; h < 60; ++h) {
      Eigen::VectorXd cand = b + alpha * step;
      double g_new = partial_g(cand);
      if (g_new <= g_cur + 1e-12 * (1.0 + std::fabs(g_cur))) {
        b = std::move(cand);
        g_cur = g_new;
        break;
      }
      alpha *= 0.5;
      if (h == 59) throw NumericalError("find_mode: line search failed");
    }
  }
  throw NumericalError("find_mode: no convergence after " + std::to_string(max_iter) +
                       " iterations (|grad| = " +
                       std::to_string(g_grad_b(tau, b, data).lpNorm<Eigen::Infinity>()) + ")");
}

LaplaceResult laplace_loglik(const Tau& tau, const MatchDataset& data,
                             const Eigen::VectorXd* warm_start) {
  LaplaceResult out;
  out.mode = find_mode(tau, data, 1e-8, 100, warm_start);
  bool clamped = false;
  out.term_a = -g_objective(tau, out.mode.b_hat, data, &clamped);
  out.mode.sigma_clamped = out.mode.sigma_clamped || clamped;
  Eigen::LLT<Eigen::MatrixXd> llt(out.mode.hessian);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("laplace_loglik: inner Hessian is not positive definite");
  }
  double log_det = 0.0;
  for (int i = 0; i < out.mode.hessian.rows(); ++i) {
    log_det += 2.0 * std::log(llt.matrixL()(i, i));
  }
  const double f = static_cast<double>(data.finger_count);
  out.term_b = -0.5 * (log_det - f * kLogTwoPi);
  out.log_lik = out.term_a + out.term_b;
  return out;
}

double quadrature_loglik(const Tau& tau, const MatchDataset& data, int nodes_per_axis,
                         double span_sds) {
  require_pairs(data);
  const int f = data.finger_count;
  if (f > 4) {
    throw InputError("quadrature_loglik supports at most 4 fingers (got " + std::to_string(f) +
                     ")");
  }
  if (nodes_per_axis < 81) throw InputError("quadrature needs >= 81 nodes per axis");

  const ModeResult mode = find_mode(tau, data);
  Eigen::LLT<Eigen::MatrixXd> llt(mode.hessian);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("quadrature_loglik: mode Hessian not positive definite");
  }
  const Eigen::MatrixXd cov =
      llt.solve(Eigen::MatrixXd::Identity(f, f)); // posterior covariance scale
  Eigen::VectorXd scale(f);
  for (int i = 0; i < f; ++i) scale[i] = std::sqrt(cov(i, i));

  bool clamped = false;
  const double s = clamped_log_sigma2(tau, &clamped);
  Tau tau_eff = tau;
  tau_eff.log_sigma2 = s;
  const auto lse = pair_lse(tau.fixed, data);

  const int n = nodes_per_axis;
  const double step_t = 2.0 * span_sds / (n - 1);
  double log_volume = 0.0;
  for (int i = 0; i < f; ++i) log_volume += std::log(scale[i] * step_t);

  // Slices along axis 0 evaluated in parallel; each yields a partial
  // log-sum-exp that is combined in index order.
  std::vector<double> slice_lse(n, -std::numeric_limits<double>::infinity());
  const std::size_t inner = static_cast<std::size_t>(std::pow(n, f - 1));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k0) {
    Eigen::VectorXd b(f);
    std::vector<double> vals;
    vals.reserve(inner);
    for (std::size_t rest = 0; rest < inner; ++rest) {
      b[0] = mode.b_hat[0] + scale[0] * (-span_sds + step_t * static_cast<double>(k0));
      std::size_t idx = rest;
      for (int axis = 1; axis < f; ++axis) {
        const std::size_t k = idx % static_cast<std::size_t>(n);
        idx /= static_cast<std::size_t>(n);
        b[axis] = mode.b_hat[axis] + scale[axis] * (-span_sds + step_t * static_cast<double>(k));
      }
      vals.push_back(-(h_value(lse, b, data) + h1_value(s, b)));
    }
    slice_lse[k0] = log_sum_exp(vals);
  });
  return log_sum_exp(slice_lse) + log_volume;
}

} // namespace fpglmm

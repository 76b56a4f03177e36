#ifndef FPGLMM_TESTS_ORACLES_HPP
#define FPGLMM_TESTS_ORACLES_HPP

// Independent reference computations for the test suites. These deliberately
// avoid the library's own code paths wherever they serve as an oracle for
// them: tails are summed directly, modes come from grid refinement, matchers
// from exhaustive assignment.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "fpglmm/dataset.hpp"
#include "fpglmm/likelihood.hpp"
#include "fpglmm/matcher.hpp"
#include "fpglmm/mathutil.hpp"
#include "fpglmm/model.hpp"

namespace oracles {

// ---- generic helpers -------------------------------------------------------

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double h = rel_step * (1.0 + std::fabs(x[i]));
    Eigen::VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

// ---- Poisson / PRC ---------------------------------------------------------

// Direct long-double pmf summation of P(S >= y).
inline double poisson_tail_direct(long y, double lambda) {
  if (y <= 0) return 1.0;
  long double p = std::exp(-static_cast<long double>(lambda));
  long double cdf = p;
  for (long k = 1; k < y; ++k) {
    p *= static_cast<long double>(lambda) / static_cast<long double>(k);
    cdf += p;
  }
  long double tail = 1.0L - cdf;
  if (tail < 1e-6L) {
    // re-sum upward for small tails
    long double t = std::exp(static_cast<long double>(y) * std::log(lambda) -
                              static_cast<long double>(lambda) -
                              std::lgamma(static_cast<long double>(y) + 1.0L));
    long double s = t;
    long double k = static_cast<long double>(y);
    for (int i = 0; i < 100000 && t > s * 1e-25L; ++i) {
      t *= static_cast<long double>(lambda) / (k + 1.0L);
      s += t;
      k += 1.0L;
    }
    tail = s;
  }
  return static_cast<double>(std::max(0.0L, tail));
}

// Closed-form sigma^2 = 0 PRC: sum over the binomial split of w.
inline double prc_sigma0_closed(long w, int m1, int m2, double p00, double beta0) {
  const double lambda = static_cast<double>(m1) * static_cast<double>(m2) * std::exp(2.0 * beta0);
  long double total = 0.0L;
  long double pmf = std::pow(1.0L - static_cast<long double>(p00), static_cast<long double>(w));
  for (long k = 0; k <= w; ++k) {
    total += pmf * static_cast<long double>(poisson_tail_direct(k, lambda));
    if (k < w) {
      pmf *= (static_cast<long double>(w - k) / static_cast<long double>(k + 1)) *
             (static_cast<long double>(p00) / (1.0L - static_cast<long double>(p00)));
    }
  }
  return static_cast<double>(std::min(total, 1.0L));
}

// ---- inner-mode grid search -------------------------------------------------

// Refining dense grid search for the minimizer of g(tau, .) over a box; each
// level shrinks the span around the best node until the grid step reaches
// `resolution`. Valid because g is convex in b.
inline Eigen::VectorXd grid_search_mode(const fpglmm::Tau& tau, const fpglmm::MatchDataset& data,
                                        double lo, double hi, double resolution = 1e-3,
                                        int nodes = 21) {
  const int f = data.finger_count;
  Eigen::VectorXd center = Eigen::VectorXd::Constant(f, 0.5 * (lo + hi));
  double span = 0.5 * (hi - lo);
  const std::size_t total = static_cast<std::size_t>(std::pow(nodes, f));
  while (true) {
    const double step = 2.0 * span / (nodes - 1);
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_b = center;
    Eigen::VectorXd b(f);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t idx = flat;
      for (int axis = 0; axis < f; ++axis) {
        const int k = static_cast<int>(idx % static_cast<std::size_t>(nodes));
        idx /= static_cast<std::size_t>(nodes);
        b[axis] = center[axis] - span + step * k;
      }
      const double val = fpglmm::g_objective(tau, b, data);
      if (val < best) {
        best = val;
        best_b = b;
      }
    }
    center = best_b;
    if (step <= resolution) return center;
    span = 2.0 * step; // keep the next window comfortably around the best node
  }
}

// ---- iterated quadrature (F = 2) --------------------------------------------

// One-axis-at-a-time integration of exp(-g): outer Riemann sum over b2 of the
// inner 1-D sums over b1, on its own grid construction.
inline double iterated_quadrature_f2(const fpglmm::Tau& tau, const fpglmm::MatchDataset& data,
                                     double span, int nodes) {
  const fpglmm::ModeResult mode = fpglmm::find_mode(tau, data);
  const Eigen::MatrixXd cov =
      mode.hessian.inverse(); // 2x2, fine to invert directly
  const double s0 = std::sqrt(cov(0, 0));
  const double s1 = std::sqrt(cov(1, 1));
  const double step0 = 2.0 * span * s0 / (nodes - 1);
  const double step1 = 2.0 * span * s1 / (nodes - 1);
  std::vector<double> outer;
  outer.reserve(nodes);
  Eigen::VectorXd b(2);
  for (int j = 0; j < nodes; ++j) {
    b[1] = mode.b_hat[1] - span * s1 + step1 * j;
    std::vector<double> inner;
    inner.reserve(nodes);
    for (int i = 0; i < nodes; ++i) {
      b[0] = mode.b_hat[0] - span * s0 + step0 * i;
      inner.push_back(-fpglmm::g_objective(tau, b, data));
    }
    outer.push_back(fpglmm::log_sum_exp(inner) + std::log(step0));
  }
  return fpglmm::log_sum_exp(outer) + std::log(step1);
}

// ---- exhaustive multinomial splits ------------------------------------------

// Sum of exp(-neg_log_complete) over every feasible four-way split of each
// pair's count; returns -log of the sum. Feasible only for tiny datasets.
inline double observed_by_enumeration(const fpglmm::FixedEffects& theta,
                                      const Eigen::VectorXd& b,
                                      const fpglmm::MatchDataset& data) {
  const std::size_t n = data.pairs.size();
  std::vector<std::vector<fpglmm::Counts4>> splits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long y = data.pairs[i].y;
    for (long c0 = 0; c0 <= y; ++c0) {
      for (long c1 = 0; c0 + c1 <= y; ++c1) {
        for (long c2 = 0; c0 + c1 + c2 <= y; ++c2) {
          splits[i].push_back({static_cast<double>(c0), static_cast<double>(c1),
                               static_cast<double>(c2), static_cast<double>(y - c0 - c1 - c2)});
        }
      }
    }
  }
  std::vector<double> log_terms;
  std::vector<fpglmm::Counts4> assignment(n);
  std::function<void(std::size_t)> recurse = [&](std::size_t level) {
    if (level == n) {
      log_terms.push_back(-fpglmm::neg_log_complete(theta, b, assignment, data));
      return;
    }
    for (const fpglmm::Counts4& c : splits[level]) {
      assignment[level] = c;
      recurse(level + 1);
    }
  };
  recurse(0);
  return -fpglmm::log_sum_exp(log_terms);
}

// ---- optimal-assignment matcher ---------------------------------------------

// Maximum bipartite matching via augmenting paths on the is_match
// compatibility graph after an exact anchor alignment.
inline int max_bipartite(const std::vector<std::vector<int>>& adj, int nb) {
  const int na = static_cast<int>(adj.size());
  std::vector<int> match_b(nb, -1);
  std::function<bool(int, std::vector<char>&)> try_kuhn = [&](int a, std::vector<char>& used) {
    for (int b : adj[a]) {
      if (used[b]) continue;
      used[b] = 1;
      if (match_b[b] == -1 || try_kuhn(match_b[b], used)) {
        match_b[b] = a;
        return true;
      }
    }
    return false;
  };
  int matched = 0;
  for (int a = 0; a < na; ++a) {
    std::vector<char> used(nb, 0);
    if (try_kuhn(a, used)) ++matched;
  }
  return matched;
}

inline int optimal_count_matches(const fpglmm::MinutiaSet& a, const fpglmm::MinutiaSet& b,
                                 const fpglmm::MatchConfig& cfg) {
  if (a.empty() || b.empty()) return 0;
  int best = 0;
  for (const fpglmm::Minutia& ap : a) {
    for (const fpglmm::Minutia& bq : b) {
      const double rot = ap.direction - bq.direction;
      const double c = std::cos(rot);
      const double s = std::sin(rot);
      std::vector<std::vector<int>> adj(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
          fpglmm::Minutia t;
          const double dx = b[j].x - bq.x;
          const double dy = b[j].y - bq.y;
          t.x = ap.x + c * dx - s * dy;
          t.y = ap.y + s * dx + c * dy;
          t.direction = fpglmm::wrap_direction(b[j].direction + rot);
          if (fpglmm::is_match(a[i], t, cfg)) adj[i].push_back(static_cast<int>(j));
        }
      }
      best = std::max(best, max_bipartite(adj, static_cast<int>(b.size())));
    }
  }
  return best;
}

} // namespace oracles

#endif

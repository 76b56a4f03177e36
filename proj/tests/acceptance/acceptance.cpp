// Acceptance suite: runs every gate at its stated tolerance and prints one
// pass/fail line per criterion. Exit code = number of failed gates.

#include <chrono>
#include <cstdio>
#include <cmath>

#include <Eigen/Dense>

#include "fpglmm/bayes.hpp"
#include "fpglmm/em.hpp"
#include "fpglmm/likelihood.hpp"
#include "fpglmm/matcher.hpp"
#include "fpglmm/mathutil.hpp"
#include "fpglmm/prc.hpp"
#include "fpglmm/simgen.hpp"
#include "../support/oracles.hpp"
#include "../support/testutil.hpp"

using namespace fpglmm;

namespace {

int failures = 0;

void report(int number, const char* name, bool pass, const std::string& detail) {
  std::printf("[criterion %2d] %-22s %s  (%s)\n", number, name, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double elapsed_sec(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Laplace fidelity against the quadrature oracle on F=3, L=2 data.
void criterion_laplace_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sim = testutil::small_db1_sim(3, 2, seed);
    const Tau tau = testutil::db1_categorical_tau();
    const double la = laplace_loglik(tau, sim.data).log_lik;
    const double lq = quadrature_loglik(tau, sim.data, 101, 8.0);
    const double rel = std::fabs(la - lq) / std::fabs(lq);
    worst = std::max(worst, rel);
    if (rel > 0.01) pass = false;
  }
  const double secs = elapsed_sec(t0);
  if (secs >= 60.0) pass = false;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "worst relative error %.3e (limit 1e-2), %.1fs (limit 60s)",
                worst, secs);
  report(1, "laplace-fidelity", pass, detail);
}

// ---------------------------------------------------------------------------
// 2. Parameter recovery at the DB1 categorical operating point, F=50, L=4.
void criterion_parameter_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Tau truth = testutil::db1_categorical_tau();
  const auto sim = testutil::small_db1_sim(50, 4, 20260811);
  const FitResult fr = fit(sim.data);
  std::vector<std::string> warnings;
  const ProposalSpec prop = build_proposal(fr, &warnings);
  const Eigen::VectorXd t = truth.stacked();
  const Eigen::VectorXd e = fr.tau_hat.stacked();
  bool pass = true;
  std::string detail;
  for (int i = 0; i < t.size(); ++i) {
    const double rel = std::fabs(e[i] - t[i]) / std::fabs(t[i]);
    const double sds = std::fabs(e[i] - t[i]) / std::sqrt(prop.covariance(i, i));
    const bool ok = rel <= 0.10 || sds <= 3.0;
    if (!ok) pass = false;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%.0f%%|%.2fsd", i ? " " : "", 100.0 * rel, sds);
    detail += buf;
  }
  const double secs = elapsed_sec(t0);
  if (secs >= 300.0) pass = false;
  char tail[64];
  std::snprintf(tail, sizeof(tail), "; %.0fs (limit 300s)", secs);
  report(2, "parameter-recovery", pass, detail + tail);
}

// ---------------------------------------------------------------------------
// 3. Coverage of the 99.9% credible intervals over 50 simulation runs.
void criterion_coverage() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.tau_true = testutil::db1_categorical_tau();
  cfg.scheme = QualityScheme::make_categorical(3);
  cfg.f = 50;
  cfg.l = 4;
  cfg.seed = 20260811;
  cfg.quality.kind = QualityAssignment::Kind::uniform_labels;
  cfg.m_assign.kind = MAssignment::Kind::fixed;
  cfg.m_assign.fixed_m = 38;
  PrcQuery q;
  q.w = 12;
  q.m1 = q.m2 = 38;
  q.q1 = q.q2 = 3;
  q.scheme = cfg.scheme;
  const CoverageReport rep = run_coverage(cfg, 50, 0.001, std::span<const PrcQuery>(&q, 1), {},
                                          2000, 200, 20000, 1000000);
  bool pass = rep.runs_completed == 50;
  double worst = 1.0;
  for (const auto& item : rep.items) {
    worst = std::min(worst, item.fraction());
    if (item.fraction() < 0.90) pass = false;
  }
  const double secs = elapsed_sec(t0);
  if (secs >= 4.0 * 3600.0) pass = false;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d/50 runs, worst per-quantity coverage %.3f (floor 0.90), %.0fs (limit 4h)",
                rep.runs_completed, worst, secs);
  report(3, "coverage", pass, detail);
  std::printf("%s", rep.to_text().c_str());
}

// ---------------------------------------------------------------------------
// 4. Monte Carlo PRC vs the closed binomial-Poisson enumeration at sigma^2=0,
//    plus seed stability for sigma^2 > 0.
void criterion_prc_exactness() {
  Tau frozen = testutil::db1_categorical_tau();
  frozen.log_sigma2 = -std::numeric_limits<double>::infinity();
  PrcQuery q;
  q.w = 12;
  q.m1 = q.m2 = 38;
  q.q1 = q.q2 = 3;
  q.scheme = QualityScheme::make_categorical(3);
  const double p00 = match_type_probs(frozen.fixed, 3, 3, q.scheme)[0];
  const double closed = oracles::prc_sigma0_closed(12, 38, 38, p00, frozen.fixed.beta0);
  const double mc = prc_unconditional(q, frozen, 1000000, 424242);
  const double abs_err = std::fabs(mc - closed);
  bool pass = abs_err <= 1e-3;

  Tau tau = testutil::db1_categorical_tau();
  const auto est_a = prc_unconditional_est(q, tau, 200000, 1);
  const auto est_b = prc_unconditional_est(q, tau, 200000, 2);
  const double se = std::hypot(est_a.se, est_b.se);
  if (std::fabs(est_a.mean - est_b.mean) > 3.0 * se) pass = false;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "sigma0 |mc-closed| = %.2e (limit 1e-3); seed gap %.2e vs 3se %.2e", abs_err,
                std::fabs(est_a.mean - est_b.mean), 3.0 * se);
  report(4, "prc-exactness", pass, detail);
}

// ---------------------------------------------------------------------------
// 5. PRC structural properties at the published fitted-scale parameters.
void criterion_prc_properties() {
  bool pass = true;
  std::string notes;
  const Tau db1 = testutil::db1_categorical_tau();
  PrcQuery q;
  q.m1 = q.m2 = 38;
  q.q1 = q.q2 = 3;
  q.scheme = QualityScheme::make_categorical(3);
  q.w = 0;
  if (prc_unconditional(q, db1, 1000, 5) != 1.0) {
    pass = false;
    notes += "PRC(0) != 1; ";
  }
  double prev = 2.0;
  for (long w = 0; w <= 38; ++w) {
    q.w = w;
    const double v = prc_unconditional(q, db1, 30000, 99);
    if (v > prev) {
      pass = false;
      notes += "w-sweep not monotone; ";
      break;
    }
    prev = v;
  }
  // quality grids at both published operating points
  auto grid_monotone = [&](const Tau& tau, int qmax, int m) {
    PosteriorSamples s;
    s.scheme = QualityScheme::make_categorical(qmax);
    s.draws.assign(2, tau.stacked());
    s.r_count = 2;
    std::vector<double> qs;
    for (int i = 1; i <= qmax; ++i) qs.push_back(i);
    const PrcGrid grid = prc_grid(12, m, m, qs, s, 30000, 0.001, 7);
    for (int i = 0; i < qmax; ++i) {
      for (int j = 0; j + 1 < qmax; ++j) {
        if (grid.cells[i * qmax + j + 1].mean > grid.cells[i * qmax + j].mean + 1e-12) {
          return false;
        }
        if (grid.cells[(j + 1) * qmax + i].mean > grid.cells[j * qmax + i].mean + 1e-12) {
          return false;
        }
      }
    }
    return true;
  };
  if (!grid_monotone(db1, 3, 38)) {
    pass = false;
    notes += "DB1 grid not monotone; ";
  }
  if (!grid_monotone(testutil::db2_categorical_tau(), 4, 40)) {
    pass = false;
    notes += "DB2 grid not monotone; ";
  }
  report(5, "prc-properties", pass, notes.empty() ? "PRC(0)=1, w-sweep and label grids monotone"
                                                  : notes);
}

// ---------------------------------------------------------------------------
// 6. Multinomial collapse: observed likelihood equals the exhaustive split sum.
void criterion_multinomial_collapse() {
  Rng rng(606);
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<testutil::PairSpec> rows;
    const auto scheme = QualityScheme::make_continuous();
    for (const auto& pi : enumerate_impostor_pairs(3, 1)) {
      rows.push_back({pi.finger_a, pi.impr_a, pi.finger_b, pi.impr_b,
                      6 + static_cast<int>(rng.next_unit() * 20),
                      6 + static_cast<int>(rng.next_unit() * 20), rng.next_unit(),
                      rng.next_unit(), static_cast<long>(rng.next_unit() * 5)});
    }
    const auto data = testutil::make_dataset(scheme, rows);
    Tau tau;
    tau.fixed.theta = Eigen::Vector2d(-1.0 - rng.next_unit(), -rng.next_unit());
    tau.fixed.beta0 = -1.5 - rng.next_unit();
    Eigen::VectorXd b(3);
    for (int i = 0; i < 3; ++i) b[i] = 0.3 * rng.next_normal();
    const double direct = neg_log_observed(tau.fixed, b, data);
    const double enumerated = oracles::observed_by_enumeration(tau.fixed, b, data);
    const double rel = std::fabs(direct - enumerated) / std::fabs(enumerated);
    worst = std::max(worst, rel);
    if (rel > 1e-10) pass = false;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "worst relative gap %.2e (limit 1e-10)", worst);
  report(6, "multinomial-collapse", pass, detail);
}

// ---------------------------------------------------------------------------
// 7. Analytic gradients vs central finite differences.
void criterion_gradient_checks() {
  Rng rng(707);
  bool pass = true;
  double worst_b = 0.0, worst_tau = 0.0;
  const auto sim = testutil::small_db1_sim(4, 2, 99);
  const auto counts = e_step(testutil::db1_categorical_tau(), sim.data);
  for (int trial = 0; trial < 20; ++trial) {
    Tau tau = testutil::db1_categorical_tau();
    for (int i = 0; i < tau.fixed.theta.size(); ++i) tau.fixed.theta[i] += 0.2 * rng.next_normal();
    tau.fixed.beta0 += 0.2 * rng.next_normal();
    tau.log_sigma2 += 0.3 * rng.next_normal();
    Eigen::VectorXd b(sim.data.finger_count);
    for (int i = 0; i < b.size(); ++i) b[i] = 0.1 * rng.next_normal();

    const Eigen::VectorXd gb = g_grad_b(tau, b, sim.data);
    const Eigen::VectorXd gb_fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& x) { return g_objective(tau, x, sim.data); }, b, 1e-6);
    for (int i = 0; i < b.size(); ++i) {
      const double rel = std::fabs(gb[i] - gb_fd[i]) / (std::fabs(gb_fd[i]) + 1e-8);
      worst_b = std::max(worst_b, rel);
      if (rel > 1e-4) pass = false;
    }

    const Eigen::VectorXd gt = gc_total_grad(tau, sim.data, counts);
    const Eigen::VectorXd gt_fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& v) {
          const Tau tv = Tau::from_stacked(v, sim.data.scheme);
          const ModeResult mode = find_mode(tv, sim.data);
          return gc_value(tv, mode.b_hat, counts, sim.data);
        },
        tau.stacked(), 1e-5);
    for (int i = 0; i < gt.size(); ++i) {
      const double rel = std::fabs(gt[i] - gt_fd[i]) / (std::fabs(gt_fd[i]) + 1e-6);
      worst_tau = std::max(worst_tau, rel);
      if (rel > 1e-4) pass = false;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "worst rel: g-in-b %.2e, gc-in-tau %.2e (limit 1e-4)",
                worst_b, worst_tau);
  report(7, "gradient-checks", pass, detail);
}

// ---------------------------------------------------------------------------
// 8. Matcher vs the exhaustive anchor x optimal-assignment oracle.
void criterion_matcher_oracle() {
  MatchConfig cfg;
  cfg.r0 = 12.0;
  cfg.u0 = 0.4;
  Rng rng(808);
  bool pass = true;
  int disagreements = 0;
  for (int trial = 0; trial < 200; ++trial) {
    MinutiaSet a, b;
    const int na = 1 + static_cast<int>(rng.next_unit() * 6);
    const int nb = 1 + static_cast<int>(rng.next_unit() * 6);
    for (int i = 0; i < na; ++i) {
      a.push_back({rng.next_unit() * 300, rng.next_unit() * 300,
                   wrap_direction(rng.next_unit() * kTwoPi)});
    }
    for (int i = 0; i < nb; ++i) {
      b.push_back({rng.next_unit() * 300, rng.next_unit() * 300,
                   wrap_direction(rng.next_unit() * kTwoPi)});
    }
    if (count_matches(a, b, cfg) != oracles::optimal_count_matches(a, b, cfg)) {
      ++disagreements;
      pass = false;
    }
    // rigid-transform invariance
    const double ang = rng.next_unit() * kTwoPi;
    const double c = std::cos(ang), s = std::sin(ang);
    const double tx = 100.0 * rng.next_normal(), ty = 100.0 * rng.next_normal();
    MinutiaSet moved;
    for (const Minutia& m : a) {
      moved.push_back({c * m.x - s * m.y + tx, s * m.x + c * m.y + ty,
                       wrap_direction(m.direction + ang)});
    }
    if (count_matches(moved, b, cfg) != count_matches(a, b, cfg)) {
      ++disagreements;
      pass = false;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%d disagreements over 200 instances", disagreements);
  report(8, "matcher-oracle", pass, detail);
}

// ---------------------------------------------------------------------------
// 9. design_w equals the brute-force scan on the sigma^2=0 fixture; '*' cells.
void criterion_design_w() {
  Tau frozen = testutil::db2_categorical_tau();
  frozen.log_sigma2 = -std::numeric_limits<double>::infinity();
  const auto scheme = QualityScheme::make_categorical(4);
  PosteriorSamples samples;
  samples.scheme = scheme;
  samples.draws.assign(2, frozen.stacked());
  samples.r_count = 2;
  bool pass = true;
  int star_cells = 0;
  std::string table = "min-w table (rows q1, cols q2): ";
  for (int q1 = 1; q1 <= 4; ++q1) {
    for (int q2 = 1; q2 <= 4; ++q2) {
      const auto fast = design_w(35, 49, q1, q2, samples, 0.01, 20000, 4242);
      std::optional<long> scan;
      for (long w = 0; w <= 35; ++w) {
        PrcQuery q;
        q.w = w;
        q.m1 = 35;
        q.m2 = 49;
        q.q1 = q1;
        q.q2 = q2;
        q.scheme = scheme;
        if (prc_posterior(q, samples, 20000, 0.001, 4242).mean <= 0.01) {
          scan = w;
          break;
        }
      }
      if (fast != scan) pass = false;
      if (!fast.has_value()) ++star_cells;
      table += fast ? std::to_string(*fast) : "*";
      table += (q2 == 4) ? (q1 == 4 ? "" : " | ") : ",";
    }
  }
  if (star_cells == 0) pass = false; // the lowest-quality corner must be infeasible
  report(9, "design-w-semantics", pass, table);
}

// ---------------------------------------------------------------------------
// 10. Documented diagnostic: our exact PRC grid at the published DB1 posterior
//     means against the published report, including the known ~4.5x gap.
void criterion_published_diagnostic() {
  const Tau db1 = testutil::db1_categorical_tau();
  PosteriorSamples samples;
  samples.scheme = QualityScheme::make_categorical(3);
  samples.draws.assign(2, db1.stacked());
  samples.r_count = 2;
  const PrcGrid grid = prc_grid(12, 38, 38, {1.0, 2.0, 3.0}, samples, 200000, 0.001, 10);
  // published PRC(12|38,38) grid for this parameter set
  const double reference[3][3] = {{0.4082, 0.2653, 0.1541},
                                  {0.2653, 0.1383, 0.0565},
                                  {0.1541, 0.0565, 0.0130}};
  bool pass = true;
  std::printf("[criterion 10] published-report diagnostic (non-gating): PRC(12|38,38)\n");
  std::printf("  q1,q2   ours      published  ratio\n");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double ours = grid.cells[i * 3 + j].mean;
      if (!std::isfinite(ours) || ours < 0.0 || ours > 1.0) pass = false;
      std::printf("  %d,%d     %8.4f  %8.4f   %5.2fx\n", i + 1, j + 1, ours, reference[i][j],
                  ours / reference[i][j]);
    }
  }
  std::printf("  note: with the finger-effect variance at zero the corner cell evaluates to\n"
              "  ~0.059 by direct enumeration (a ~4.5x gap to the published 0.0130); with the\n"
              "  fitted variance the Monte Carlo value above is slightly larger still. The\n"
              "  gap is documented rather than reconciled.\n");
  report(10, "published-diagnostic", pass, "grid evaluated and published above (non-gating)");
}

} // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_laplace_fidelity();
  criterion_parameter_recovery();
  criterion_prc_exactness();
  criterion_prc_properties();
  criterion_multinomial_collapse();
  criterion_gradient_checks();
  criterion_matcher_oracle();
  criterion_design_w();
  criterion_published_diagnostic();
  criterion_coverage(); // slowest last
  std::printf("acceptance total: %.0fs, %d failure(s)\n", elapsed_sec(t0), failures);
  return failures;
}

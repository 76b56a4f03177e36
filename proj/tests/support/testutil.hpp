#ifndef FPGLMM_TESTS_TESTUTIL_HPP
#define FPGLMM_TESTS_TESTUTIL_HPP

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fpglmm/dataset.hpp"
#include "fpglmm/model.hpp"
#include "fpglmm/rng.hpp"
#include "fpglmm/simgen.hpp"

namespace testutil {

struct PairSpec {
  int fa, ia, fb, ib, ma, mb;
  double qa, qb;
  long y;
};

inline fpglmm::MatchDataset make_dataset(const fpglmm::QualityScheme& scheme,
                                         const std::vector<PairSpec>& rows) {
  fpglmm::MatchDataset data;
  data.scheme = scheme;
  for (const PairSpec& r : rows) {
    fpglmm::PairObs p;
    p.finger_a = r.fa;
    p.impr_a = r.ia;
    p.finger_b = r.fb;
    p.impr_b = r.ib;
    p.m_a = r.ma;
    p.m_b = r.mb;
    p.q_a = r.qa;
    p.q_b = r.qb;
    p.y = r.y;
    data.pairs.push_back(p);
  }
  data.finalize();
  return data;
}

// Fully balanced design with m = 1 and all four channel rates equal to 1/4,
// so each pair's total rate is exactly 1 at b = 0: theta0 = beta0 = -log 2,
// slope 0. Useful wherever a symmetric stationary point is needed.
inline fpglmm::Tau unit_rate_tau(double log_sigma2) {
  fpglmm::Tau tau;
  tau.fixed.theta = Eigen::Vector2d(-std::log(2.0), 0.0);
  tau.fixed.beta0 = -std::log(2.0);
  tau.log_sigma2 = log_sigma2;
  return tau;
}

inline fpglmm::MatchDataset unit_rate_dataset(int f, int l, long y_everywhere,
                                              double q = 0.5) {
  std::vector<PairSpec> rows;
  for (const auto& pi : fpglmm::enumerate_impostor_pairs(f, l)) {
    rows.push_back({pi.finger_a, pi.impr_a, pi.finger_b, pi.impr_b, 1, 1, q, q, y_everywhere});
  }
  return make_dataset(fpglmm::QualityScheme::make_continuous(), rows);
}

// Categorical parameter set matching the published FVC2002 DB1 fit
// (posterior means), used as a realistic operating point.
inline fpglmm::Tau db1_categorical_tau() {
  fpglmm::Tau tau;
  tau.fixed.theta = Eigen::Vector3d(-3.4857, -0.7429, -1.6144);
  tau.fixed.beta0 = -2.7297;
  tau.log_sigma2 = -4.9537;
  return tau;
}

// Continuous parameter set matching the published FVC2002 DB1 fit.
inline fpglmm::Tau db1_continuous_tau() {
  fpglmm::Tau tau;
  tau.fixed.theta = Eigen::Vector2d(-1.2801, -5.8520);
  tau.fixed.beta0 = -2.9047;
  tau.log_sigma2 = -4.9518;
  return tau;
}

// Per-label spurious-step factors phi_q = e^beta0 + e^{theta0 + S_q}: the
// functionals of the categorical fixed effects that observed match totals
// actually pin down.
inline Eigen::VectorXd categorical_phis(const fpglmm::Tau& tau, int qmax) {
  Eigen::VectorXd out(qmax);
  const double a = std::exp(tau.fixed.beta0);
  double steps = 0.0;
  for (int q = 1; q <= qmax; ++q) {
    if (q >= 2) steps += tau.fixed.theta[q - 1];
    out[q - 1] = a + std::exp(tau.fixed.theta[0] + steps);
  }
  return out;
}

// Small simulated dataset at the continuous DB1-scale parameters.
inline fpglmm::SimOutput small_continuous_sim(int f, int l, std::uint64_t seed,
                                              int fixed_m = 38) {
  fpglmm::SimConfig cfg;
  cfg.tau_true = db1_continuous_tau();
  cfg.scheme = fpglmm::QualityScheme::make_continuous();
  cfg.f = f;
  cfg.l = l;
  cfg.seed = seed;
  cfg.quality.kind = fpglmm::QualityAssignment::Kind::uniform_continuous;
  cfg.quality.lo = 0.35;
  cfg.quality.hi = 0.9;
  cfg.m_assign.kind = fpglmm::MAssignment::Kind::fixed;
  cfg.m_assign.fixed_m = fixed_m;
  return fpglmm::simulate_dataset(cfg);
}

// Categorical parameter set matching the published FVC2002 DB2 fit.
inline fpglmm::Tau db2_categorical_tau() {
  fpglmm::Tau tau;
  tau.fixed.theta.resize(4);
  tau.fixed.theta << -2.9255, -1.1496, -0.9676, -4.2827;
  tau.fixed.beta0 = -2.8810;
  tau.log_sigma2 = -4.7817;
  return tau;
}

// Small simulated dataset at the DB1-scale categorical parameters.
inline fpglmm::SimOutput small_db1_sim(int f, int l, std::uint64_t seed, int fixed_m = 38) {
  fpglmm::SimConfig cfg;
  cfg.tau_true = db1_categorical_tau();
  cfg.scheme = fpglmm::QualityScheme::make_categorical(3);
  cfg.f = f;
  cfg.l = l;
  cfg.seed = seed;
  cfg.quality.kind = fpglmm::QualityAssignment::Kind::uniform_labels;
  cfg.m_assign.kind = fpglmm::MAssignment::Kind::fixed;
  cfg.m_assign.fixed_m = fixed_m;
  return fpglmm::simulate_dataset(cfg);
}

// Unique path under the build temp dir.
inline std::string temp_path(const std::string& name) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() / "fpglmm_tests";
  std::filesystem::create_directories(dir);
  return (dir / (std::to_string(++counter) + "_" + name)).string();
}

} // namespace testutil

#endif

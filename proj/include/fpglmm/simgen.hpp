#ifndef FPGLMM_SIMGEN_HPP
#define FPGLMM_SIMGEN_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpglmm/em.hpp"
#include "fpglmm/prc.hpp"

namespace fpglmm {

// Per-impression quality assignment rule.
struct QualityAssignment {
  enum class Kind { fixed_table, uniform_labels, label_probs, uniform_continuous };
  Kind kind = Kind::uniform_labels;
  std::vector<double> fixed;  // fixed_table: size F*L, impression (f,l) at (f-1)*L+(l-1)
  std::vector<double> probs;  // label_probs: per label 1..qmax
  double lo = 0.0, hi = 1.0;  // uniform_continuous
};

// Per-impression minutia-count rule.
struct MAssignment {
  enum class Kind { fixed, per_label_mean };
  Kind kind = Kind::fixed;
  int fixed_m = 38;
  std::vector<double> mean_by_label; // per label 1..qmax; counts ~ Poisson(mean), min 1
};

struct SimConfig {
  Tau tau_true;
  int f = 2;
  int l = 1;
  QualityScheme scheme;
  QualityAssignment quality;
  MAssignment m_assign;
  std::uint64_t seed = 0;
};

// Hidden generation record kept for oracle checks.
struct SimTruth {
  Tau tau_true;
  Eigen::VectorXd b;                          // per finger
  std::vector<std::array<long, 4>> type_counts; // per pair, channel order
};

struct SimOutput {
  MatchDataset data;
  SimTruth truth;
};

SimOutput simulate_dataset(const SimConfig& cfg);

void save_truth_csv(const SimTruth& truth, const QualityScheme& scheme,
                    const std::string& path,
                    const std::vector<std::string>& comments = {});

struct CoverageReport {
  struct Item {
    std::string name;
    double truth = 0.0;
    int covered = 0;
    int total = 0;
    double fraction() const { return total > 0 ? static_cast<double>(covered) / total : 0.0; }
  };
  int runs_requested = 0;
  int runs_completed = 0;
  std::vector<std::string> failures; // one message per failed run, never silent
  std::vector<Item> items;           // tau components first, then PRC queries
  double average_coverage() const;
  std::string to_text() const;
  std::string to_csv() const;
};

// Repeated simulate -> fit -> posterior -> credible-interval pipeline; the
// true PRC of each query comes from tau_true via the exact sigma^2 = 0
// enumeration or a large Monte Carlo run.
//
// init_at_truth starts each re-fit at the generating parameters. The
// categorical linear predictors are only identified up to a one-dimensional
// theta0/beta0 trade-off by observed match totals, so an arbitrary start
// would converge to a different point of the same likelihood ridge and the
// componentwise intervals would be about that point, not the truth. The
// oracle start keeps the re-fit on the generating branch, which is what a
// coverage study of the interval machinery is meant to isolate.
CoverageReport run_coverage(const SimConfig& cfg, int runs, double alpha,
                            std::span<const PrcQuery> queries, const EmControls& controls = {},
                            int h_proposals = 2000, int r_samples = 200, long prc_mc = 20000,
                            long truth_mc = 1000000, bool init_at_truth = true);

} // namespace fpglmm

#endif

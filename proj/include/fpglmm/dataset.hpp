#ifndef FPGLMM_DATASET_HPP
#define FPGLMM_DATASET_HPP

#include <string>
#include <vector>

#include "fpglmm/matcher.hpp"
#include "fpglmm/model.hpp"

namespace fpglmm {

// One impostor pair with its observed match count. finger/impression ids are
// the user's labels; finger_index_* are dense 0-based indices assigned by the
// dataset for random-effect bookkeeping.
struct PairObs {
  int finger_a = 0;
  int impr_a = 0;
  int finger_b = 0;
  int impr_b = 0;
  int m_a = 0;
  int m_b = 0;
  double q_a = 0.0;
  double q_b = 0.0;
  long y = 0;

  int finger_index_a = -1;
  int finger_index_b = -1;
  double log_mm = 0.0; // log(m_a*m_b), cached

  PairCovariates covariates() const;
};

// Immutable after construction/loading; all consumers may share it.
struct MatchDataset {
  std::vector<PairObs> pairs;
  int finger_count = 0;           // F
  int impressions_per_finger = 0; // L; 0 when irregular
  QualityScheme scheme;

  // Assigns dense finger indices and caches log(m_a*m_b). Throws InputError
  // on genuine pairs, bad counts, or quality values invalid under the scheme.
  void finalize();

  long total_matches() const;
  std::size_t size() const { return pairs.size(); }
};

// Label flip so that larger categorical labels mean better quality.
int relabel_categorical(int q0, int qmax);

struct PairIndex {
  int finger_a, impr_a, finger_b, impr_b;
};

// All unordered cross-finger impression pairs; count = F(F-1)L^2/2.
std::vector<PairIndex> enumerate_impostor_pairs(int f, int l);

// CSV schema: finger_a,impr_a,finger_b,impr_b,m_a,m_b,q_a,q_b,y.
MatchDataset load_matches(const std::string& path, const QualityScheme& scheme);
void save_matches(const MatchDataset& data, const std::string& path,
                  const std::vector<std::string>& comments = {});

enum class SummaryStatistic { y_mean_sd, mm_mean_sd, ratio_mean_sd };

struct SummaryCell {
  double mean = 0.0;
  double sd = 0.0;
  long count = 0;
};

// Quality-pair table, symmetrized by pooling (q1,q2) with (q2,q1).
struct SummaryTable {
  std::vector<std::string> labels;
  std::vector<SummaryCell> cells; // labels.size()^2 row-major

  SummaryCell& at(std::size_t i, std::size_t j) { return cells[i * labels.size() + j]; }
  const SummaryCell& at(std::size_t i, std::size_t j) const {
    return cells[i * labels.size() + j];
  }
  std::string to_text(const std::string& title) const;
  std::string to_csv() const;
};

// continuous_bins applies to continuous schemes only (equal-width over [0,1]).
SummaryTable summarize(const MatchDataset& data, SummaryStatistic stat,
                       int continuous_bins = 10);

// Quality CSV schema: finger,impression,q.
// Every (finger,impression) seen in the minutia files must have a quality row.
MatchDataset build_matches_from_minutiae(const std::vector<std::string>& minutia_files,
                                         const std::string& quality_file,
                                         const MatchConfig& cfg, const QualityScheme& scheme);

} // namespace fpglmm

#endif

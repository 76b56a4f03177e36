#ifndef FPGLMM_MODEL_HPP
#define FPGLMM_MODEL_HPP

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <string>

namespace fpglmm {

enum class QualityKind { continuous, categorical };

// Continuous quality lives in [0,1]; categorical labels in {1,..,qmax} with
// larger labels meaning better images.
struct QualityScheme {
  QualityKind kind = QualityKind::continuous;
  int qmax = 0; // categorical only

  static QualityScheme make_continuous();
  static QualityScheme make_categorical(int qmax);

  // Fixed-effect count including beta0: 3 for continuous, qmax+1 for categorical.
  int fixed_dim() const { return kind == QualityKind::continuous ? 3 : qmax + 1; }
  int theta_dim() const { return fixed_dim() - 1; }

  void validate_quality(double q) const; // throws InputError
  std::string describe() const;

  bool operator==(const QualityScheme&) const = default;
};

// theta holds the spurious-minutia effects (theta0 plus the quality slopes or
// per-label steps); beta0 is the genuine-pairing intercept.
struct FixedEffects {
  Eigen::VectorXd theta;
  double beta0 = 0.0;

  int dim() const { return static_cast<int>(theta.size()) + 1; }
};

// Full fixed-parameter vector. The variance component is carried as
// log(sigma^2) so every coordinate is unconstrained.
struct Tau {
  FixedEffects fixed;
  double log_sigma2 = 0.0;

  double sigma2() const { return std::exp(log_sigma2); }
  int dim() const { return fixed.dim() + 1; }

  // Stacking order: theta..., beta0, log_sigma2.
  Eigen::VectorXd stacked() const;
  static Tau from_stacked(const Eigen::VectorXd& v, const QualityScheme& scheme);
};

// Covariates of one impostor pair. finger_a != finger_b always.
struct PairCovariates {
  int finger_a = 0;
  int finger_b = 0;
  int m_a = 0;
  int m_b = 0;
  double q_a = 0.0;
  double q_b = 0.0;
};

// Match-type channel order used throughout: (u,v) = (0,0),(0,1),(1,0),(1,1).
inline constexpr int kChannels = 4;
inline constexpr int channel_of(int u, int v) { return 2 * u + v; }

// Quality-effect linear predictor eta^{(u,v)} for one pair.
double eta_component(const FixedEffects& fixed, double q_a, double q_b, int u, int v,
                     const QualityScheme& scheme);

// Row x(u,v) with x(u,v) . (theta,beta0) == eta_component.
Eigen::VectorXd design_row(double q_a, double q_b, int u, int v, const QualityScheme& scheme);

// log sum_{u,v} exp(eta^{(u,v)}), overflow-safe.
double log_sum_eta(const FixedEffects& fixed, double q_a, double q_b,
                   const QualityScheme& scheme);

// Multinomial probabilities p^{(u,v)} of a random match being of each type.
std::array<double, 4> match_type_probs(const FixedEffects& fixed, double q_a, double q_b,
                                       const QualityScheme& scheme);

// Poisson rate m_a*m_b*exp(b_a + b_b + eta^{(u,v)}); evaluated in log space
// with a single final exponentiation.
double pair_rate(const Tau& tau, const PairCovariates& pair, double b_a, double b_b, int u,
                 int v, const QualityScheme& scheme);

// Per-evaluation helper: precomputes the categorical theta prefix sums once so
// per-pair eta evaluation is O(1). Used by the likelihood hot loops.
class EtaCalc {
public:
  EtaCalc(const FixedEffects& fixed, const QualityScheme& scheme);

  // out[channel_of(u,v)] = eta^{(u,v)}
  void etas(double q_a, double q_b, double out[4]) const;

  // Sum over r=1..q-1 of theta_r (empty sum = 0 at the lowest label).
  double theta_steps(double q) const;

  const QualityScheme& scheme() const { return scheme_; }

private:
  const FixedEffects& fixed_;
  QualityScheme scheme_;
  Eigen::VectorXd prefix_; // categorical: prefix_[q] = theta_1+..+theta_{q-1}
};

// Fills the four design rows (theta...,beta0 coefficients) for one pair.
// rows must hold 4*p doubles, row-major.
void fill_design_rows(const QualityScheme& scheme, double q_a, double q_b, double* rows);

// Stacked coordinate names: theta0.., beta0, log_sigma2.
std::vector<std::string> tau_component_names(const QualityScheme& scheme);

} // namespace fpglmm

#endif

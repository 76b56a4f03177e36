#ifndef FPGLMM_PRC_HPP
#define FPGLMM_PRC_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpglmm/bayes.hpp"
#include "fpglmm/model.hpp"

namespace fpglmm {

struct PrcQuery {
  long w = 0;   // observed match count
  int m1 = 1;
  int m2 = 1;
  double q1 = 0.0;
  double q2 = 0.0;
  QualityScheme scheme;
};

struct PrcReport {
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.0;
  long mc_draws = 0;
  int r_samples = 0;
};

// P(S >= y) for S ~ Poisson(lambda), exact to double precision. Computed by
// the pmf recurrence: the lower sum when the tail is large, the upper sum
// (fully in scaled space) when it is small.
double poisson_upper_tail(long y, double lambda);

// Conditional tail probability at rate m1*m2*exp(2 beta0 + b1 + b2).
// Rates above 1e9 are outside the model's regime and rejected.
double prc_star(long y00, double b1, double b2, int m1, int m2, double beta0);

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

// Monte Carlo marginal PRC over b1, b2 ~ N(0, sigma^2) and the binomial
// thinning of w into genuine-pair matches. Common random numbers make the
// estimate exactly symmetric in (q1,q2) and exactly nonincreasing in w.
McEstimate prc_unconditional_est(const PrcQuery& query, const Tau& tau, long mc_draws,
                                 std::uint64_t seed);
double prc_unconditional(const PrcQuery& query, const Tau& tau, long mc_draws,
                         std::uint64_t seed);

// Closed-form PRC for sigma^2 = 0: binomial-Poisson enumeration over the
// genuine-match count.
double prc_exact_sigma_zero(const PrcQuery& query, const Tau& tau);

// Posterior summary over the resampled draws; CI = mean +- z_{1-alpha/2} sd,
// clamped to [0,1].
PrcReport prc_posterior(const PrcQuery& query, const PosteriorSamples& samples, long mc_draws,
                        double alpha, std::uint64_t seed);

// Smallest w in 0..min(m1,m2) whose posterior-mean PRC is <= target, or
// nullopt when none exists. Exploits the exact monotonicity in w.
std::optional<long> design_w(int m1, int m2, double q1, double q2,
                             const PosteriorSamples& samples, double target, long mc_draws,
                             std::uint64_t seed);

// Quality-grid reports in the style of the headline tables.
struct PrcGrid {
  std::vector<double> q_values;
  std::vector<PrcReport> cells; // row-major over (q1,q2)
  std::string to_text(const std::string& title) const;
  std::string to_csv() const;
};
PrcGrid prc_grid(long w, int m1, int m2, const std::vector<double>& q_values,
                 const PosteriorSamples& samples, long mc_draws, double alpha,
                 std::uint64_t seed);

struct DesignGrid {
  std::vector<double> q_values;
  std::vector<std::optional<long>> cells; // '*' when empty
  std::string to_text(const std::string& title) const;
  std::string to_csv() const;
};
DesignGrid design_grid(int m1, int m2, const std::vector<double>& q_values,
                       const PosteriorSamples& samples, double target, long mc_draws,
                       std::uint64_t seed);

} // namespace fpglmm

#endif

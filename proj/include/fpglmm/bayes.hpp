#ifndef FPGLMM_BAYES_HPP
#define FPGLMM_BAYES_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fpglmm/em.hpp"
#include "fpglmm/rng.hpp"

namespace fpglmm {

// Gaussian proposal centered at the fitted parameters with the inverse
// curvature as covariance.
struct ProposalSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd chol_lower; // L with covariance = L L'

  double logpdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;
  int dim() const { return static_cast<int>(mean.size()); }
};

struct PosteriorSamples {
  std::vector<Eigen::VectorXd> draws; // R stacked tau vectors
  Eigen::VectorXd weights;            // H normalized importance weights
  double ess = 0.0;                   // 1 / sum w^2
  std::uint64_t seed = 0;
  int h_count = 0;
  int r_count = 0;
  QualityScheme scheme;
  std::vector<std::string> warnings;
};

// Covariance = inverse of fit.tau_hessian; a small ridge is applied (with a
// warning) when the curvature is not positive definite.
ProposalSpec build_proposal(const FitResult& fit, std::vector<std::string>* warnings = nullptr);

// log posterior up to a constant: Laplace log-likelihood plus the flat prior
// on (theta, beta0, log sigma^2). The 1/sigma^2 scale prior is exactly flat
// in the log sigma^2 parametrization.
double log_unnormalized_posterior(const Tau& tau, const MatchDataset& data);

// Draws H proposals, importance-weights them against log_target, and
// resamples R draws with replacement. Deterministic for a given seed.
PosteriorSamples importance_resample(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                     const QualityScheme& scheme, const ProposalSpec& proposal,
                                     int h, int r, std::uint64_t seed);

// Data-bound variant targeting the Laplace posterior.
PosteriorSamples importance_resample(const MatchDataset& data, const ProposalSpec& proposal,
                                     int h, int r, std::uint64_t seed);

// CSV: one row per draw, tau component columns, 17 significant digits.
void save_samples_csv(const PosteriorSamples& samples, const std::string& path,
                      const std::string& manifest_note = "");
PosteriorSamples load_samples_csv(const std::string& path);

} // namespace fpglmm

#endif

#include "fpglmm/bayes.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "fpglmm/csv.hpp"
#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"
#include "fpglmm/parallel.hpp"

namespace fpglmm {

double ProposalSpec::logpdf(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd z =
      chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  double log_det_l = 0.0;
  for (int i = 0; i < chol_lower.rows(); ++i) log_det_l += std::log(chol_lower(i, i));
  return -0.5 * z.squaredNorm() - log_det_l - 0.5 * static_cast<double>(dim()) * kLogTwoPi;
}

Eigen::VectorXd ProposalSpec::sample(Rng& rng) const {
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = rng.next_normal();
  return mean + chol_lower * z;
}

ProposalSpec build_proposal(const FitResult& fit, std::vector<std::string>* warnings) {
  const int dim = static_cast<int>(fit.tau_hessian.rows());
  if (dim == 0 || fit.tau_hessian.cols() != dim) {
    throw InputError("build_proposal: fit carries no curvature matrix");
  }
  Eigen::MatrixXd curv = 0.5 * (fit.tau_hessian + fit.tau_hessian.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(curv);
  if (llt.info() != Eigen::Success) {
    // Flat or indefinite directions (the categorical scheme has an exact
    // theta0/beta0 trade-off that observed totals cannot resolve) get a ridge,
    // escalated geometrically until the matrix factors. The resulting huge
    // proposal variance along such directions is the honest statement that
    // the data do not constrain them.
    double ridge = 1e-8 * std::max(curv.trace(), 1.0) / dim;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd shifted = curv;
      shifted.diagonal().array() += ridge;
      llt.compute(shifted);
      if (llt.info() == Eigen::Success) {
        curv = shifted;
        break;
      }
      ridge *= 10.0;
    }
    if (llt.info() != Eigen::Success) {
      throw NumericalError(
          "build_proposal: curvature matrix is not positive definite even after ridge "
          "regularization; re-fit the model");
    }
    if (warnings) {
      warnings->push_back("curvature not positive definite; ridge " + std::to_string(ridge) +
                          " applied (flat/unidentified direction in the curvature)");
    }
  }
  ProposalSpec spec;
  spec.mean = fit.tau_hat.stacked();
  spec.covariance = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  spec.covariance = 0.5 * (spec.covariance + spec.covariance.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> cov_llt(spec.covariance);
  if (cov_llt.info() != Eigen::Success) {
    throw NumericalError("build_proposal: proposal covariance lost positive definiteness");
  }
  spec.chol_lower = cov_llt.matrixL();
  return spec;
}

double log_unnormalized_posterior(const Tau& tau, const MatchDataset& data) {
  return laplace_loglik(tau, data).log_lik;
}

PosteriorSamples importance_resample(
    const std::function<double(const Eigen::VectorXd&)>& log_target,
    const QualityScheme& scheme, const ProposalSpec& proposal, int h, int r,
    std::uint64_t seed) {
  if (h < 1 || r < 1 || h < r) throw InputError("importance_resample requires H >= R >= 1");

  std::vector<Eigen::VectorXd> proposals(static_cast<std::size_t>(h));
  Eigen::VectorXd log_w(h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t i) {
    Rng rng(mix_seed(seed, i));
    proposals[i] = proposal.sample(rng);
    double lt = log_target(proposals[i]);
    log_w[static_cast<int>(i)] =
        std::isfinite(lt) ? lt - proposal.logpdf(proposals[i])
                          : -std::numeric_limits<double>::infinity();
  });

  const double m = log_w.maxCoeff();
  if (!std::isfinite(m)) {
    throw NumericalError("importance_resample: every importance weight is zero or NaN");
  }
  Eigen::VectorXd w = (log_w.array() - m).exp();
  const double d_norm = w.sum();
  w /= d_norm;

  PosteriorSamples out;
  out.scheme = scheme;
  out.weights = w;
  out.ess = 1.0 / w.squaredNorm();
  out.seed = seed;
  out.h_count = h;
  out.r_count = r;
  if (out.ess < 0.1 * static_cast<double>(h)) {
    out.warnings.push_back("effective sample size " + std::to_string(out.ess) + " is below 10% of H " +
                           "(proposal/posterior mismatch)");
  }

  // Multinomial resampling on a stream distinct from the H proposal streams.
  std::vector<double> cumulative(static_cast<std::size_t>(h));
  double acc = 0.0;
  for (int i = 0; i < h; ++i) {
    acc += w[i];
    cumulative[static_cast<std::size_t>(i)] = acc;
  }
  cumulative.back() = 1.0;
  Rng resample_rng(mix_seed(seed, static_cast<std::uint64_t>(h)));
  out.draws.reserve(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const double u = resample_rng.next_unit();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out.draws.push_back(proposals[static_cast<std::size_t>(it - cumulative.begin())]);
  }
  return out;
}

PosteriorSamples importance_resample(const MatchDataset& data, const ProposalSpec& proposal,
                                     int h, int r, std::uint64_t seed) {
  // Every evaluation warm-starts from the MAP-mode random effects so results
  // do not depend on evaluation order.
  const Tau center = Tau::from_stacked(proposal.mean, data.scheme);
  const Eigen::VectorXd b_map = find_mode(center, data).b_hat;
  auto target = [&](const Eigen::VectorXd& v) {
    const Tau tau = Tau::from_stacked(v, data.scheme);
    try {
      return laplace_loglik(tau, data, &b_map).log_lik;
    } catch (const NumericalError&) {
      // overflowed or unsolvable draws carry no posterior mass
      return -std::numeric_limits<double>::infinity();
    }
  };
  return importance_resample(target, data.scheme, proposal, h, r, seed);
}

void save_samples_csv(const PosteriorSamples& samples, const std::string& path,
                      const std::string& manifest_note) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << "# posterior samples\n";
  out << "# scheme: " << samples.scheme.describe() << "\n";
  out << "# seed: " << samples.seed << "\n";
  out << "# h: " << samples.h_count << "\n";
  out << "# r: " << samples.r_count << "\n";
  out << "# ess: " << format_double(samples.ess) << "\n";
  for (const std::string& w : samples.warnings) out << "# warning: " << w << "\n";
  if (!manifest_note.empty()) out << "# manifest: " << manifest_note << "\n";
  const auto names = tau_component_names(samples.scheme);
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << "\n";
  for (const Eigen::VectorXd& d : samples.draws) {
    for (int i = 0; i < d.size(); ++i) out << (i ? "," : "") << format_double(d[i]);
    out << "\n";
  }
  if (!out) throw InputError(path + ": write failed");
}

PosteriorSamples load_samples_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  PosteriorSamples out;
  bool have_scheme = false;
  for (const std::string& c : t.comments) {
    std::size_t pos = c.find(':');
    if (pos == std::string::npos) continue;
    std::string key = c.substr(0, pos);
    std::string value = c.substr(pos + 1);
    auto trim = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(value);
    if (key == "scheme") {
      if (value == "continuous") {
        out.scheme = QualityScheme::make_continuous();
        have_scheme = true;
      } else if (value.rfind("categorical qmax=", 0) == 0) {
        out.scheme = QualityScheme::make_categorical(std::stoi(value.substr(17)));
        have_scheme = true;
      } else {
        throw InputError(path + ": unrecognized scheme comment '" + value + "'");
      }
    } else if (key == "seed") {
      out.seed = std::stoull(value);
    } else if (key == "h") {
      out.h_count = std::stoi(value);
    } else if (key == "r") {
      out.r_count = std::stoi(value);
    } else if (key == "ess") {
      out.ess = std::stod(value);
    }
  }
  if (!have_scheme) throw InputError(path + ": missing '# scheme:' metadata");
  const auto names = tau_component_names(out.scheme);
  if (t.header != names) {
    throw InputError(path + ": header does not match the declared scheme's components");
  }
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    Eigen::VectorXd v(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) v[static_cast<int>(c)] = parse_double(t, row, c);
    out.draws.push_back(std::move(v));
  }
  if (out.draws.empty()) throw InputError(path + ": no posterior draws");
  if (out.r_count == 0) out.r_count = static_cast<int>(out.draws.size());
  return out;
}

} // namespace fpglmm

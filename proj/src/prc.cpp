#include "fpglmm/prc.hpp"

#include <cmath>
#include <sstream>

#include "fpglmm/csv.hpp"
#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"
#include "fpglmm/parallel.hpp"

namespace fpglmm {

double poisson_upper_tail(long y, double lambda) {
  if (y <= 0) return 1.0;
  if (!(lambda >= 0.0)) throw InputError("poisson_upper_tail: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;

  if (static_cast<double>(y) > lambda) {
    // Upper sum from y with geometric decay; scaled so the leading pmf can
    // underflow without losing the tail.
    const double log_t0 =
        static_cast<double>(y) * std::log(lambda) - lambda - log_factorial(static_cast<double>(y));
    double rel = 1.0;
    double term = 1.0;
    double k = static_cast<double>(y);
    for (long i = 0; i < 100000; ++i) {
      term *= lambda / (k + 1.0);
      rel += term;
      k += 1.0;
      if (term < rel * 1e-18) break;
    }
    return std::exp(log_t0 + std::log(rel));
  }

  // y <= lambda: the tail is large; accumulate the lower CDF. For lambda past
  // exp underflow the pmf recurrence runs in log space.
  double cdf;
  if (lambda <= 700.0) {
    double p = std::exp(-lambda);
    cdf = p;
    for (long k = 1; k < y; ++k) {
      p *= lambda / static_cast<double>(k);
      cdf += p;
      if (cdf >= 1.0 - 1e-16) return std::max(0.0, 1.0 - cdf);
    }
  } else {
    double log_cdf = -lambda;
    double log_p = -lambda;
    for (long k = 1; k < y; ++k) {
      log_p += std::log(lambda / static_cast<double>(k));
      const double m = std::max(log_cdf, log_p);
      log_cdf = m + std::log(std::exp(log_cdf - m) + std::exp(log_p - m));
    }
    cdf = std::exp(log_cdf);
  }
  return std::max(0.0, 1.0 - cdf);
}

double prc_star(long y00, double b1, double b2, int m1, int m2, double beta0) {
  if (m1 < 1 || m2 < 1) throw InputError("prc_star requires m1, m2 >= 1");
  if (y00 < 0) throw InputError("prc_star requires y00 >= 0");
  const double log_lambda = std::log(static_cast<double>(m1)) +
                            std::log(static_cast<double>(m2)) + 2.0 * beta0 + b1 + b2;
  const double lambda = std::exp(log_lambda);
  if (!(lambda <= 1e9)) {
    throw ModelError("prc_star: Poisson rate " + std::to_string(lambda) +
                     " is outside the model's regime (> 1e9)");
  }
  return poisson_upper_tail(y00, lambda);
}

namespace {

void validate_query(const PrcQuery& query, const Tau& tau) {
  if (query.m1 < 1 || query.m2 < 1) throw InputError("PRC query requires m1, m2 >= 1");
  if (query.w < 0) throw InputError("PRC query requires w >= 0");
  query.scheme.validate_quality(query.q1);
  query.scheme.validate_quality(query.q2);
  if (tau.fixed.dim() != query.scheme.fixed_dim()) {
    throw InputError("tau dimension does not match the query's quality scheme");
  }
}

} // namespace

McEstimate prc_unconditional_est(const PrcQuery& query, const Tau& tau, long mc_draws,
                                 std::uint64_t seed) {
  validate_query(query, tau);
  if (mc_draws < 1) throw InputError("prc_unconditional needs mc_draws >= 1");
  if (query.w == 0) return {1.0, 0.0}; // every PRC* term is P(S >= 0) = 1

  const double p00_ab = match_type_probs(tau.fixed, query.q1, query.q2, query.scheme)[0];
  const double p00_ba = match_type_probs(tau.fixed, query.q2, query.q1, query.scheme)[0];
  const double sigma = std::sqrt(tau.sigma2());
  const double log_base = std::log(static_cast<double>(query.m1)) +
                          std::log(static_cast<double>(query.m2)) + 2.0 * tau.fixed.beta0;
  const long w = query.w;

  // Fixed-size blocks with per-draw seed streams: deterministic for any
  // worker count, and the same uniforms serve both quality orderings and any
  // smaller w (first-w prefix), which is what makes design_w scans exact.
  const long block = 65536;
  const long nblocks = (mc_draws + block - 1) / block;
  std::vector<double> block_sum(static_cast<std::size_t>(nblocks), 0.0);
  std::vector<double> block_sumsq(static_cast<std::size_t>(nblocks), 0.0);

  parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bi) {
    const long lo = static_cast<long>(bi) * block;
    const long hi = std::min(lo + block, mc_draws);
    double s = 0.0, s2 = 0.0;
    for (long k = lo; k < hi; ++k) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
      const double b1 = sigma * rng.next_normal();
      const double b2 = sigma * rng.next_normal();
      const double lambda = std::exp(log_base + b1 + b2);
      if (!(lambda <= 1e9)) {
        throw ModelError("prc_unconditional: Poisson rate exceeded 1e9");
      }
      long y_ab = 0, y_ba = 0;
      for (long i = 0; i < w; ++i) {
        const double u = rng.next_unit();
        if (u < p00_ab) ++y_ab;
        if (u < p00_ba) ++y_ba;
      }
      const double v =
          0.5 * (poisson_upper_tail(y_ab, lambda) + poisson_upper_tail(y_ba, lambda));
      s += v;
      s2 += v * v;
    }
    block_sum[bi] = s;
    block_sumsq[bi] = s2;
  });

  double sum = 0.0, sumsq = 0.0;
  for (std::size_t bi = 0; bi < block_sum.size(); ++bi) {
    sum += block_sum[bi];
    sumsq += block_sumsq[bi];
  }
  const double n = static_cast<double>(mc_draws);
  McEstimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, sumsq / n - est.mean * est.mean);
  est.se = std::sqrt(var / n);
  return est;
}

double prc_unconditional(const PrcQuery& query, const Tau& tau, long mc_draws,
                         std::uint64_t seed) {
  return prc_unconditional_est(query, tau, mc_draws, seed).mean;
}

double prc_exact_sigma_zero(const PrcQuery& query, const Tau& tau) {
  validate_query(query, tau);
  if (tau.sigma2() != 0.0) {
    throw InputError("prc_exact_sigma_zero requires sigma^2 = 0");
  }
  const double p00 = match_type_probs(tau.fixed, query.q1, query.q2, query.scheme)[0];
  const double lambda = std::exp(std::log(static_cast<double>(query.m1)) +
                                 std::log(static_cast<double>(query.m2)) + 2.0 * tau.fixed.beta0);
  const long w = query.w;
  // Binomial(w, p00) pmf by recurrence, paired with the Poisson tail.
  double total = 0.0;
  double pmf = std::pow(1.0 - p00, static_cast<double>(w));
  for (long k = 0; k <= w; ++k) {
    total += pmf * poisson_upper_tail(k, lambda);
    if (k < w) {
      pmf *= (static_cast<double>(w - k) / static_cast<double>(k + 1)) * (p00 / (1.0 - p00));
    }
  }
  return std::min(total, 1.0);
}

PrcReport prc_posterior(const PrcQuery& query, const PosteriorSamples& samples, long mc_draws,
                        double alpha, std::uint64_t seed) {
  if (samples.draws.empty()) throw InputError("prc_posterior: no posterior draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("prc_posterior: alpha must be in (0,1)");
  if (!(samples.scheme == query.scheme)) {
    throw InputError("prc_posterior: sample scheme differs from query scheme");
  }
  const int r = static_cast<int>(samples.draws.size());
  std::vector<double> values(static_cast<std::size_t>(r));
  // Common random numbers across the posterior draws: the reported SD then
  // measures parameter spread alone, and identical draws give sd = 0 exactly.
  parallel_for(static_cast<std::size_t>(r), [&](std::size_t i) {
    const Tau tau = Tau::from_stacked(samples.draws[i], query.scheme);
    values[i] = prc_unconditional(query, tau, mc_draws, seed);
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(r);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = r > 1 ? std::sqrt(ss / static_cast<double>(r - 1)) : 0.0;
  const double z = normal_quantile(1.0 - alpha / 2.0);
  PrcReport report;
  report.mean = mean;
  report.sd = sd;
  report.ci_low = std::max(0.0, mean - z * sd);
  report.ci_high = std::min(1.0, mean + z * sd);
  report.alpha = alpha;
  report.mc_draws = mc_draws;
  report.r_samples = r;
  return report;
}

std::optional<long> design_w(int m1, int m2, double q1, double q2,
                             const PosteriorSamples& samples, double target, long mc_draws,
                             std::uint64_t seed) {
  if (!(target > 0.0 && target <= 1.0)) throw InputError("design_w: target must be in (0,1]");
  const long wmax = std::min(m1, m2);
  PrcQuery query;
  query.m1 = m1;
  query.m2 = m2;
  query.q1 = q1;
  query.q2 = q2;
  query.scheme = samples.scheme;
  auto mean_at = [&](long w) {
    query.w = w;
    return prc_posterior(query, samples, mc_draws, 0.001, seed).mean;
  };
  if (mean_at(0) <= target) return 0; // PRC(0) = 1, so only target = 1 hits here
  if (mean_at(wmax) > target) return std::nullopt;
  // mean_at is exactly nonincreasing in w under the shared seed.
  long lo = 0, hi = wmax; // mean_at(lo) > target >= mean_at(hi)
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (mean_at(mid) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

PrcGrid prc_grid(long w, int m1, int m2, const std::vector<double>& q_values,
                 const PosteriorSamples& samples, long mc_draws, double alpha,
                 std::uint64_t seed) {
  if (q_values.empty()) throw InputError("prc_grid: no quality values");
  PrcGrid grid;
  grid.q_values = q_values;
  const std::size_t n = q_values.size();
  grid.cells.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      PrcQuery query;
      query.w = w;
      query.m1 = m1;
      query.m2 = m2;
      query.q1 = q_values[i];
      query.q2 = q_values[j];
      query.scheme = samples.scheme;
      grid.cells[i * n + j] = prc_posterior(query, samples, mc_draws, alpha, seed);
    }
  }
  return grid;
}

std::string PrcGrid::to_text(const std::string& title) const {
  std::ostringstream os;
  os << title << "\n";
  const std::size_t n = q_values.size();
  os << "q1\\q2";
  for (std::size_t j = 0; j < n; ++j) os << "\t" << q_values[j];
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    os << q_values[i];
    for (std::size_t j = 0; j < n; ++j) {
      const PrcReport& c = cells[i * n + j];
      char buf[80];
      std::snprintf(buf, sizeof(buf), "%.4f [%.4f,%.4f]", c.mean, c.ci_low, c.ci_high);
      os << "\t" << buf;
    }
    os << "\n";
  }
  return os.str();
}

std::string PrcGrid::to_csv() const {
  std::ostringstream os;
  os << "q1,q2,mean,sd,ci_low,ci_high\n";
  const std::size_t n = q_values.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const PrcReport& c = cells[i * n + j];
      os << q_values[i] << ',' << q_values[j] << ',' << format_double(c.mean) << ','
         << format_double(c.sd) << ',' << format_double(c.ci_low) << ','
         << format_double(c.ci_high) << "\n";
    }
  }
  return os.str();
}

DesignGrid design_grid(int m1, int m2, const std::vector<double>& q_values,
                       const PosteriorSamples& samples, double target, long mc_draws,
                       std::uint64_t seed) {
  if (q_values.empty()) throw InputError("design_grid: no quality values");
  DesignGrid grid;
  grid.q_values = q_values;
  const std::size_t n = q_values.size();
  grid.cells.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      grid.cells[i * n + j] =
          design_w(m1, m2, q_values[i], q_values[j], samples, target, mc_draws, seed);
    }
  }
  return grid;
}

std::string DesignGrid::to_text(const std::string& title) const {
  std::ostringstream os;
  os << title << "\n";
  const std::size_t n = q_values.size();
  os << "q1\\q2";
  for (std::size_t j = 0; j < n; ++j) os << "\t" << q_values[j];
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    os << q_values[i];
    for (std::size_t j = 0; j < n; ++j) {
      const auto& c = cells[i * n + j];
      os << "\t" << (c ? std::to_string(*c) : std::string("*"));
    }
    os << "\n";
  }
  return os.str();
}

std::string DesignGrid::to_csv() const {
  std::ostringstream os;
  os << "q1,q2,min_w\n";
  const std::size_t n = q_values.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& c = cells[i * n + j];
      os << q_values[i] << ',' << q_values[j] << ',' << (c ? std::to_string(*c) : std::string("*"))
         << "\n";
    }
  }
  return os.str();
}

} // namespace fpglmm

#ifndef FPGLMM_MATHUTIL_HPP
#define FPGLMM_MATHUTIL_HPP

#include <algorithm>
#include <cmath>
#include <span>

namespace fpglmm {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// log(sum(exp(xs))) with max-subtraction; -inf for an empty span.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_sum_exp4(const double (&xs)[4]) {
  return log_sum_exp(std::span<const double>(xs, 4));
}

// log(y!) via log-gamma; valid for nonnegative real y.
inline double log_factorial(double y) { return std::lgamma(y + 1.0); }

double normal_cdf(double x);

// Inverse standard normal CDF, accurate to full double precision.
double normal_quantile(double p);

} // namespace fpglmm

#endif

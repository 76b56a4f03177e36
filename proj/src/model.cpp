#include "fpglmm/model.hpp"

#include "fpglmm/errors.hpp"
#include "fpglmm/mathutil.hpp"

namespace fpglmm {

QualityScheme QualityScheme::make_continuous() {
  QualityScheme s;
  s.kind = QualityKind::continuous;
  s.qmax = 0;
  return s;
}

QualityScheme QualityScheme::make_categorical(int qmax) {
  if (qmax < 1 || qmax > 16) {
    throw InputError("categorical scheme requires 1 <= qmax <= 16, got " + std::to_string(qmax));
  }
  QualityScheme s;
  s.kind = QualityKind::categorical;
  s.qmax = qmax;
  return s;
}

void QualityScheme::validate_quality(double q) const {
  if (kind == QualityKind::continuous) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw InputError("continuous quality " + std::to_string(q) + " outside [0,1]");
    }
    return;
  }
  double r = std::round(q);
  if (!(r == q && r >= 1.0 && r <= static_cast<double>(qmax))) {
    throw InputError("categorical quality " + std::to_string(q) + " not an integer in 1.." +
                     std::to_string(qmax));
  }
}

std::string QualityScheme::describe() const {
  if (kind == QualityKind::continuous) return "continuous";
  return "categorical qmax=" + std::to_string(qmax);
}

Eigen::VectorXd Tau::stacked() const {
  Eigen::VectorXd v(dim());
  v.head(fixed.theta.size()) = fixed.theta;
  v[fixed.theta.size()] = fixed.beta0;
  v[fixed.theta.size() + 1] = log_sigma2;
  return v;
}

Tau Tau::from_stacked(const Eigen::VectorXd& v, const QualityScheme& scheme) {
  const int p = scheme.fixed_dim();
  if (v.size() != p + 1) {
    throw InputError("stacked parameter vector has length " + std::to_string(v.size()) +
                     ", scheme needs " + std::to_string(p + 1));
  }
  Tau tau;
  tau.fixed.theta = v.head(p - 1);
  tau.fixed.beta0 = v[p - 1];
  tau.log_sigma2 = v[p];
  return tau;
}

namespace {

void check_dims(const FixedEffects& fixed, const QualityScheme& scheme) {
  if (fixed.dim() != scheme.fixed_dim()) {
    throw InputError("fixed-effect dimension " + std::to_string(fixed.dim()) +
                     " does not match scheme (" + scheme.describe() + ", p=" +
                     std::to_string(scheme.fixed_dim()) + ")");
  }
}

void check_type(int u, int v) {
  if ((u != 0 && u != 1) || (v != 0 && v != 1)) {
    throw InputError("minutia type indices must be 0 or 1");
  }
}

} // namespace

EtaCalc::EtaCalc(const FixedEffects& fixed, const QualityScheme& scheme)
    : fixed_(fixed), scheme_(scheme) {
  check_dims(fixed, scheme);
  if (scheme_.kind == QualityKind::categorical) {
    prefix_.resize(scheme_.qmax + 1);
    prefix_[0] = 0.0;
    prefix_[1] = 0.0; // label 1 has the empty step sum
    for (int q = 2; q <= scheme_.qmax; ++q) prefix_[q] = prefix_[q - 1] + fixed_.theta[q - 1];
  }
}

double EtaCalc::theta_steps(double q) const {
  if (scheme_.kind == QualityKind::continuous) return fixed_.theta[1] * q;
  return prefix_[static_cast<int>(q)];
}

void EtaCalc::etas(double q_a, double q_b, double out[4]) const {
  const double t0 = fixed_.theta[0];
  const double b0 = fixed_.beta0;
  const double sa = theta_steps(q_a);
  const double sb = theta_steps(q_b);
  out[channel_of(0, 0)] = 2.0 * b0;
  out[channel_of(0, 1)] = b0 + t0 + sb;
  out[channel_of(1, 0)] = b0 + t0 + sa;
  out[channel_of(1, 1)] = 2.0 * t0 + (sa + sb); // grouped so a (q,u)<->(q,v) swap is exact

}

double eta_component(const FixedEffects& fixed, double q_a, double q_b, int u, int v,
                     const QualityScheme& scheme) {
  check_type(u, v);
  scheme.validate_quality(q_a);
  scheme.validate_quality(q_b);
  EtaCalc calc(fixed, scheme);
  double e[4];
  calc.etas(q_a, q_b, e);
  return e[channel_of(u, v)];
}

void fill_design_rows(const QualityScheme& scheme, double q_a, double q_b, double* rows) {
  const int p = scheme.fixed_dim();
  std::fill(rows, rows + 4 * p, 0.0);
  double* r00 = rows + channel_of(0, 0) * p;
  double* r01 = rows + channel_of(0, 1) * p;
  double* r10 = rows + channel_of(1, 0) * p;
  double* r11 = rows + channel_of(1, 1) * p;
  r00[p - 1] = 2.0; // beta0
  r01[p - 1] = 1.0;
  r10[p - 1] = 1.0;
  r01[0] = 1.0; // theta0
  r10[0] = 1.0;
  r11[0] = 2.0;
  if (scheme.kind == QualityKind::continuous) {
    r01[1] = q_b;
    r10[1] = q_a;
    r11[1] = q_a + q_b;
  } else {
    const int qa = static_cast<int>(q_a);
    const int qb = static_cast<int>(q_b);
    for (int r = 1; r < qb; ++r) r01[r] += 1.0;
    for (int r = 1; r < qa; ++r) r10[r] += 1.0;
    for (int r = 1; r < qa; ++r) r11[r] += 1.0;
    for (int r = 1; r < qb; ++r) r11[r] += 1.0;
  }
}

Eigen::VectorXd design_row(double q_a, double q_b, int u, int v, const QualityScheme& scheme) {
  check_type(u, v);
  scheme.validate_quality(q_a);
  scheme.validate_quality(q_b);
  const int p = scheme.fixed_dim();
  Eigen::VectorXd all = Eigen::VectorXd::Zero(4 * p);
  fill_design_rows(scheme, q_a, q_b, all.data());
  return all.segment(channel_of(u, v) * p, p);
}

double log_sum_eta(const FixedEffects& fixed, double q_a, double q_b,
                   const QualityScheme& scheme) {
  scheme.validate_quality(q_a);
  scheme.validate_quality(q_b);
  EtaCalc calc(fixed, scheme);
  double e[4];
  calc.etas(q_a, q_b, e);
  return log_sum_exp4(e);
}

std::array<double, 4> match_type_probs(const FixedEffects& fixed, double q_a, double q_b,
                                       const QualityScheme& scheme) {
  scheme.validate_quality(q_a);
  scheme.validate_quality(q_b);
  EtaCalc calc(fixed, scheme);
  double e[4];
  calc.etas(q_a, q_b, e);
  const double lse = log_sum_exp4(e);
  std::array<double, 4> probs;
  for (int c = 0; c < kChannels; ++c) probs[c] = std::exp(e[c] - lse);
  return probs;
}

std::vector<std::string> tau_component_names(const QualityScheme& scheme) {
  std::vector<std::string> names;
  for (int r = 0; r < scheme.theta_dim(); ++r) names.push_back("theta" + std::to_string(r));
  names.push_back("beta0");
  names.push_back("log_sigma2");
  return names;
}

double pair_rate(const Tau& tau, const PairCovariates& pair, double b_a, double b_b, int u,
                 int v, const QualityScheme& scheme) {
  if (pair.m_a < 1 || pair.m_b < 1) throw InputError("pair_rate requires m_a, m_b >= 1");
  const double eta = eta_component(tau.fixed, pair.q_a, pair.q_b, u, v, scheme);
  const double log_mm =
      std::log(static_cast<double>(pair.m_a)) + std::log(static_cast<double>(pair.m_b));
  return std::exp(log_mm + b_a + b_b + eta);
}

} // namespace fpglmm

#include <doctest.h>

#include <cmath>

#include "fpglmm/errors.hpp"
#include "fpglmm/model.hpp"
#include "fpglmm/rng.hpp"
#include "../support/testutil.hpp"

using namespace fpglmm;

namespace {

FixedEffects continuous_fx(double t0, double t1, double b0) {
  FixedEffects fx;
  fx.theta = Eigen::Vector2d(t0, t1);
  fx.beta0 = b0;
  return fx;
}

} // namespace

TEST_CASE("eta_component: continuous closed forms") {
  const auto scheme = QualityScheme::make_continuous();
  const auto fx = continuous_fx(-1.0, -2.0, -3.0);
  CHECK(eta_component(fx, 0.5, 0.5, 0, 0, scheme) == doctest::Approx(-6.0).epsilon(1e-15));
  CHECK(eta_component(fx, 0.5, 0.5, 0, 1, scheme) == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK(eta_component(fx, 0.5, 0.5, 1, 0, scheme) == doctest::Approx(-5.0).epsilon(1e-15));
  CHECK(eta_component(fx, 0.5, 0.5, 1, 1, scheme) == doctest::Approx(-4.0).epsilon(1e-15));
}

TEST_CASE("eta_component: categorical at the DB1 operating point") {
  const auto scheme = QualityScheme::make_categorical(3);
  const Tau tau = testutil::db1_categorical_tau();
  CHECK(eta_component(tau.fixed, 3, 3, 0, 0, scheme) == doctest::Approx(-5.4594).epsilon(1e-12));
  // label 1 takes the empty step sum
  CHECK(eta_component(tau.fixed, 1, 1, 0, 1, scheme) ==
        doctest::Approx(tau.fixed.beta0 + tau.fixed.theta[0]).epsilon(1e-15));
}

TEST_CASE("eta_component: dimension mismatch is a configuration error") {
  const auto scheme = QualityScheme::make_categorical(3);
  const auto fx = continuous_fx(-1.0, -2.0, -3.0); // p=3, scheme wants 4
  CHECK_THROWS_AS(eta_component(fx, 1, 1, 0, 0, scheme), InputError);
}

TEST_CASE("eta_component: symmetric under simultaneous (q,u) swap") {
  Rng rng(2024);
  const auto cont = QualityScheme::make_continuous();
  const auto cat = QualityScheme::make_categorical(5);
  FixedEffects fc, fk;
  for (int trial = 0; trial < 200; ++trial) {
    fc.theta = Eigen::Vector2d(rng.next_normal(), rng.next_normal());
    fc.beta0 = rng.next_normal();
    fk.theta = Eigen::VectorXd(5);
    for (int i = 0; i < 5; ++i) fk.theta[i] = rng.next_normal();
    fk.beta0 = rng.next_normal();
    const double qa = rng.next_unit();
    const double qb = rng.next_unit();
    const int la = 1 + static_cast<int>(rng.next_unit() * 5);
    const int lb = 1 + static_cast<int>(rng.next_unit() * 5);
    for (int u = 0; u <= 1; ++u) {
      for (int v = 0; v <= 1; ++v) {
        CHECK(eta_component(fc, qa, qb, u, v, cont) == eta_component(fc, qb, qa, v, u, cont));
        CHECK(eta_component(fk, la, lb, u, v, cat) == eta_component(fk, lb, la, v, u, cat));
      }
    }
  }
}

TEST_CASE("design_row: stated coefficients") {
  const auto scheme = QualityScheme::make_continuous();
  const Eigen::VectorXd r00 = design_row(0.5, 0.5, 0, 0, scheme);
  CHECK(r00[0] == 0.0);
  CHECK(r00[1] == 0.0);
  CHECK(r00[2] == 2.0);
  const Eigen::VectorXd r11 = design_row(0.3, 0.7, 1, 1, scheme);
  CHECK(r11[0] == 2.0);
  CHECK(r11[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r11[2] == 0.0);
}

TEST_CASE("design_row: inner product reproduces eta_component") {
  Rng rng(99);
  const auto cont = QualityScheme::make_continuous();
  const auto cat = QualityScheme::make_categorical(4);
  for (int trial = 0; trial < 1200; ++trial) {
    const bool categorical = (trial % 2) == 1;
    const QualityScheme& scheme = categorical ? cat : cont;
    FixedEffects fx;
    fx.theta = Eigen::VectorXd(scheme.theta_dim());
    for (int i = 0; i < fx.theta.size(); ++i) fx.theta[i] = 2.0 * rng.next_normal();
    fx.beta0 = 2.0 * rng.next_normal();
    const double qa = categorical ? 1 + static_cast<int>(rng.next_unit() * 4) : rng.next_unit();
    const double qb = categorical ? 1 + static_cast<int>(rng.next_unit() * 4) : rng.next_unit();
    const int u = rng.next_unit() < 0.5 ? 0 : 1;
    const int v = rng.next_unit() < 0.5 ? 0 : 1;
    Eigen::VectorXd stacked(scheme.fixed_dim());
    stacked.head(fx.theta.size()) = fx.theta;
    stacked[fx.theta.size()] = fx.beta0;
    const double via_row = design_row(qa, qb, u, v, scheme).dot(stacked);
    const double direct = eta_component(fx, qa, qb, u, v, scheme);
    CHECK(via_row == doctest::Approx(direct).epsilon(1e-14));
  }
}

TEST_CASE("log_sum_eta: equal terms and DB1 values") {
  const auto scheme = QualityScheme::make_continuous();
  FixedEffects zero = continuous_fx(0.0, 0.0, 0.0);
  CHECK(log_sum_eta(zero, 0.3, 0.8, scheme) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  const auto cat = QualityScheme::make_categorical(3);
  const Tau tau = testutil::db1_categorical_tau();
  // independent scalar route: sum the four exponentials directly
  double direct = 0.0;
  for (int u = 0; u <= 1; ++u) {
    for (int v = 0; v <= 1; ++v) direct += std::exp(eta_component(tau.fixed, 3, 3, u, v, cat));
  }
  const double lse = log_sum_eta(tau.fixed, 3, 3, cat);
  CHECK(lse == doctest::Approx(std::log(direct)).epsilon(1e-13));
  CHECK(lse == doctest::Approx(-5.37241145).epsilon(1e-8));
}

TEST_CASE("log_sum_eta: shift identity") {
  const auto scheme = QualityScheme::make_continuous();
  // integer-valued etas and an exactly representable shift make the identity exact
  FixedEffects fx = continuous_fx(-1.0, 0.0, -2.0);
  const double base = log_sum_eta(fx, 0.5, 0.5, scheme);
  FixedEffects shifted = fx; // adding c to beta0 and theta0... instead shift via beta0/theta0
  const double c = 4.0;
  shifted.beta0 = fx.beta0 + c / 2.0;  // eta00 += c
  shifted.theta[0] = fx.theta[0] + c / 2.0;
  // all four etas gain exactly c: eta01 = b0 + t0 (+0) gains c/2+c/2, eta11 = 2 t0 gains c
  const double moved = log_sum_eta(shifted, 0.5, 0.5, scheme);
  CHECK(moved - base == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("match_type_probs: symmetry, DB1 value, odds ratio") {
  const auto scheme = QualityScheme::make_continuous();
  FixedEffects zero = continuous_fx(0.0, 0.0, 0.0);
  const auto uniform = match_type_probs(zero, 0.2, 0.9, scheme);
  for (double p : uniform) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));

  const auto cat = QualityScheme::make_categorical(3);
  const Tau tau = testutil::db1_categorical_tau();
  const auto probs = match_type_probs(tau.fixed, 3, 3, cat);
  // oracle: direct normalization of the four exponentials
  double denom = 0.0;
  for (int u = 0; u <= 1; ++u) {
    for (int v = 0; v <= 1; ++v) denom += std::exp(eta_component(tau.fixed, 3, 3, u, v, cat));
  }
  const double p00_direct = std::exp(eta_component(tau.fixed, 3, 3, 0, 0, cat)) / denom;
  CHECK(probs[0] == doctest::Approx(p00_direct).epsilon(1e-12));
  CHECK(probs[0] == doctest::Approx(0.9166875917).epsilon(1e-8));

  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    FixedEffects fx = continuous_fx(rng.next_normal(), rng.next_normal(), rng.next_normal());
    const auto p = match_type_probs(fx, rng.next_unit(), rng.next_unit(), scheme);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const double odds = (p[channel_of(1, 1)] * p[channel_of(0, 0)]) /
                        (p[channel_of(0, 1)] * p[channel_of(1, 0)]);
    CHECK(odds == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("match_type_probs: spurious odds decrease with better labels") {
  const auto cat = QualityScheme::make_categorical(4);
  const Tau tau = testutil::db2_categorical_tau();
  for (int u = 0; u <= 1; ++u) {
    double prev = std::numeric_limits<double>::infinity();
    for (int qb = 1; qb <= 4; ++qb) {
      const auto p = match_type_probs(tau.fixed, 2, qb, cat);
      const double ratio = p[channel_of(u, 1)] / p[channel_of(u, 0)];
      CHECK(ratio < prev);
      prev = ratio;
    }
  }
}

TEST_CASE("pair_rate: identity, DB1 value, linearity") {
  const auto scheme = QualityScheme::make_continuous();
  Tau tau;
  tau.fixed = continuous_fx(0.0, 0.0, 0.0);
  tau.log_sigma2 = 0.0;
  PairCovariates unit{0, 1, 1, 1, 0.5, 0.5};
  CHECK(pair_rate(tau, unit, 0.0, 0.0, 0, 0, scheme) == doctest::Approx(1.0).epsilon(1e-15));

  const auto cat = QualityScheme::make_categorical(3);
  const Tau db1 = testutil::db1_categorical_tau();
  PairCovariates pc{0, 1, 38, 38, 3, 3};
  CHECK(pair_rate(db1, pc, 0.0, 0.0, 0, 0, cat) == doctest::Approx(6.145820882).epsilon(1e-8));

  PairCovariates doubled = pc;
  doubled.m_a = 76;
  CHECK(pair_rate(db1, doubled, 0.0, 0.0, 0, 0, cat) ==
        doctest::Approx(2.0 * pair_rate(db1, pc, 0.0, 0.0, 0, 0, cat)).epsilon(1e-14));

  PairCovariates bad = pc;
  bad.m_a = 0;
  CHECK_THROWS_AS(pair_rate(db1, bad, 0.0, 0.0, 0, 0, cat), InputError);
}

TEST_CASE("quality scheme validation") {
  const auto cont = QualityScheme::make_continuous();
  CHECK_THROWS_AS(cont.validate_quality(-0.1), InputError);
  CHECK_THROWS_AS(cont.validate_quality(1.5), InputError);
  cont.validate_quality(0.0);
  cont.validate_quality(1.0);
  const auto cat = QualityScheme::make_categorical(3);
  CHECK_THROWS_AS(cat.validate_quality(0), InputError);
  CHECK_THROWS_AS(cat.validate_quality(4), InputError);
  CHECK_THROWS_AS(cat.validate_quality(2.5), InputError);
  cat.validate_quality(1);
  cat.validate_quality(3);
}

TEST_CASE("tau stacking round trip") {
  const Tau tau = testutil::db1_categorical_tau();
  const auto scheme = QualityScheme::make_categorical(3);
  const Tau back = Tau::from_stacked(tau.stacked(), scheme);
  CHECK(back.fixed.theta == tau.fixed.theta);
  CHECK(back.fixed.beta0 == tau.fixed.beta0);
  CHECK(back.log_sigma2 == tau.log_sigma2);
  CHECK(tau.sigma2() == doctest::Approx(std::exp(-4.9537)));
}

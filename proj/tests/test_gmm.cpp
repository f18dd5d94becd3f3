#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsi/gmm.hpp"

#include <cmath>
#include <random>

using namespace nsi;

namespace {

// Grid-search oracle for scalar GMM with A = (1,...,1)': minimize
// (m - beta 1)' W (m - beta 1) over a fine beta grid.
double grid_gmm(const Vec& m, const Mat& W) {
  const Vec ones = Vec::Ones(m.size());
  double best = 0.0, best_val = 1e300;
  for (double b = -5.0; b <= 5.0; b += 1e-5) {
    const Vec res = m - b * ones;
    const double val = res.dot(W * res);
    if (val < best_val) {
      best_val = val;
      best = b;
    }
  }
  return best;
}

// Quadrature oracle for the chi-square survival function: Simpson's rule on
// the density x^{k/2-1} e^{-x/2} / (2^{k/2} Gamma(k/2)) from t upward.
double chi2_sf_quadrature(double t, int k) {
  const double norm = std::pow(2.0, k / 2.0) * std::tgamma(k / 2.0);
  auto dens = [&](double x) {
    return std::pow(x, k / 2.0 - 1.0) * std::exp(-x / 2.0) / norm;
  };
  const double lo = t > 0.0 ? t : 1e-12;
  const double hi = t + 200.0;
  const int steps = 400000;
  const double h = (hi - lo) / steps;
  double acc = dens(lo) + dens(hi);
  for (int i = 1; i < steps; ++i) acc += dens(lo + i * h) * ((i % 2) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

MomentSummary scalar_summary(const Vec& m_bar, const Mat& Omega, Eigen::Index n) {
  MomentSummary s;
  s.m_bar = m_bar;
  s.Omega = Omega;
  s.n = n;
  s.J = static_cast<int>(m_bar.size());
  s.d_R = 1;
  s.coefficient_names = {"tau"};
  for (Eigen::Index j = 0; j < m_bar.size(); ++j)
    s.measurement_names.push_back("y" + std::to_string(j + 1));
  return s;
}

Mat random_spd(Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat A(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) A(i, j) = nd(rng);
  Mat S = A * A.transpose() / static_cast<double>(k);
  S.diagonal().array() += 0.05;
  return S;
}

}  // namespace

TEST_CASE("identity weighting averages the per-measurement moments") {
  Vec m(3);
  m << 0.7, 0.8, 0.9;
  const MomentSummary s = scalar_summary(m, Mat::Identity(3, 3), 100);
  const GmmEstimate est = pool_gmm(s, Weighting::identity);
  CHECK(est.beta(0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(est.J_df == 2);
  CHECK(est.per_measurement(2, 0) == doctest::Approx(0.9));
}

TEST_CASE("diagonal efficient weighting is precision-weighted") {
  Vec m(2);
  m << 0.8, 1.0;
  Mat Omega = Mat::Zero(2, 2);
  Omega(0, 0) = 1.0;
  Omega(1, 1) = 4.0;
  const MomentSummary s = scalar_summary(m, Omega, 400);
  const GmmEstimate est = pool_gmm(s, Weighting::efficient, 0.0);
  // weights 0.8, 0.2 -> 0.8*0.8 + 0.2*1.0 = 0.84
  CHECK(est.beta(0) == doctest::Approx(0.84).epsilon(1e-10));
  // sandwich variance: 1/(n * 1'Omega^{-1}1) = 1/(400 * 1.25)
  CHECK(est.se(0) == doctest::Approx(std::sqrt(1.0 / 500.0)).epsilon(1e-10));
}

TEST_CASE("single measurement collapses to the plain mean with J stat zero") {
  Vec m(1);
  m << 0.92;
  Mat Omega(1, 1);
  Omega << 2.5;
  const MomentSummary s = scalar_summary(m, Omega, 250);
  for (Weighting w : {Weighting::identity, Weighting::efficient}) {
    const GmmEstimate est = pool_gmm(s, w);
    CHECK(est.beta(0) == doctest::Approx(0.92));
    CHECK(est.se(0) == doctest::Approx(std::sqrt(2.5 / 250.0)).epsilon(1e-9));
    CHECK(est.J_stat == doctest::Approx(0.0));
    CHECK(est.J_df == 0);
    CHECK(est.J_pvalue == doctest::Approx(1.0));
  }
}

TEST_CASE("closed form matches a grid-search oracle") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    Vec m(3);
    for (int j = 0; j < 3; ++j) m(j) = 0.8 + 0.3 * nd(rng);
    const Mat Omega = random_spd(3, 100 + static_cast<std::uint64_t>(trial));
    const MomentSummary s = scalar_summary(m, Omega, 500);
    const GmmEstimate est = pool_gmm(s, Weighting::efficient, 0.0);
    CHECK(std::abs(est.beta(0) - grid_gmm(m, Omega.inverse())) < 1e-3);
  }
}

TEST_CASE("chi-square survival matches quadrature oracle") {
  CHECK(chi2_survival(9.0, 3) ==
        doctest::Approx(chi2_sf_quadrature(9.0, 3)).epsilon(1e-6));
  CHECK(chi2_survival(9.0, 1) ==
        doctest::Approx(chi2_sf_quadrature(9.0, 1)).epsilon(1e-6));
  CHECK(chi2_survival(0.5, 2) == doctest::Approx(std::exp(-0.25)).epsilon(1e-10));
  CHECK(chi2_survival(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("J statistic under exact agreement is zero") {
  Vec m = Vec::Constant(4, 0.8);
  const MomentSummary s = scalar_summary(m, random_spd(4, 7), 300);
  const GmmEstimate est = pool_gmm(s, Weighting::efficient);
  CHECK(est.beta(0) == doctest::Approx(0.8));
  CHECK(est.J_stat == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(est.J_pvalue == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("efficient weighting never beats identity in variance") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Vec m(3);
    for (int j = 0; j < 3; ++j) m(j) = nd(rng);
    const Mat Omega = random_spd(3, 400 + static_cast<std::uint64_t>(trial));
    const MomentSummary s = scalar_summary(m, Omega, 1000);
    const GmmEstimate eff = pool_gmm(s, Weighting::efficient, 0.0);
    const GmmEstimate id = pool_gmm(s, Weighting::identity, 0.0);
    CHECK(eff.se(0) <= id.se(0) * (1.0 + 1e-10));
  }
}

TEST_CASE("per-coefficient pooling matches the joint solve blockwise") {
  // two coefficients, two measurements, Omega diagonal: the joint efficient
  // solve must agree with pooling each coefficient's J means separately
  MomentSummary s;
  s.J = 2;
  s.d_R = 2;
  s.n = 600;
  s.coefficient_names = {"intercept", "z"};
  s.measurement_names = {"y2", "y3"};
  s.m_bar.resize(4);  // ordering: (j=1: c0 c1), (j=2: c0 c1)
  s.m_bar << 0.1, 0.8, 0.3, 1.0;
  s.Omega = Mat::Zero(4, 4);
  s.Omega(0, 0) = 1.0;  // j=1, coefficient 0
  s.Omega(1, 1) = 1.0;  // j=1, coefficient 1
  s.Omega(2, 2) = 2.0;  // j=2, coefficient 0
  s.Omega(3, 3) = 4.0;  // j=2, coefficient 1
  const GmmEstimate joint = pool_gmm(s, Weighting::efficient, 0.0);
  const GmmEstimate per = pool_per_coefficient(s, Weighting::efficient, 0.0);
  REQUIRE(per.beta.size() == 2);
  CHECK(joint.beta(0) == doctest::Approx(per.beta(0)).epsilon(1e-10));
  CHECK(joint.beta(1) == doctest::Approx(per.beta(1)).epsilon(1e-10));
  // coefficient 0: weights 2/3, 1/3 -> 0.1*2/3 + 0.3/3
  CHECK(per.beta(0) == doctest::Approx(0.1 * 2.0 / 3.0 + 0.1).epsilon(1e-10));
  // coefficient 1: weights 0.8, 0.2 -> 0.84
  CHECK(per.beta(1) == doctest::Approx(0.84).epsilon(1e-10));
  CHECK(per.J_stat == doctest::Approx(joint.J_stat).epsilon(1e-8));
  CHECK(per.J_df == 2);
}

TEST_CASE("wald equality test") {
  auto make_est = [](double beta, double se) {
    GmmEstimate e;
    e.beta = Vec::Constant(1, beta);
    e.cov = Mat::Constant(1, 1, se * se);
    e.se = Vec::Constant(1, se);
    return e;
  };
  const WaldTest same = wald_equality_test(make_est(0.8, 0.1), make_est(0.8, 0.2));
  CHECK(same.stat == doctest::Approx(0.0));
  CHECK(same.p_value == doctest::Approx(1.0));
  // difference 0.3, combined se 0.1 -> stat 9, df 1
  const WaldTest t = wald_equality_test(make_est(0.8, 0.06), make_est(1.1, 0.08));
  CHECK(t.stat == doctest::Approx(9.0).epsilon(1e-10));
  CHECK(t.df == 1);
  CHECK(t.p_value == doctest::Approx(chi2_sf_quadrature(9.0, 1)).epsilon(1e-5));
  CHECK(t.p_value < 0.01);

  CHECK_THROWS_AS(wald_equality_test(make_est(0.8, 0.1), make_est(0.9, 0.1), 3),
                  ConfigError);
}

TEST_CASE("summarize_moments on hand-built scores") {
  ScoreMatrix sm;
  sm.d_R = 1;
  sm.coefficient_names = {"tau"};
  sm.measurement_names = {"y1", "y2"};
  Mat psi1(4, 1), psi2(4, 1);
  psi1 << 1.0, 2.0, 3.0, 4.0;
  psi2 << 2.0, 2.0, 2.0, 2.0;
  sm.psi = {psi1, psi2};
  const MomentSummary s = summarize_moments(sm);
  CHECK(s.J == 2);
  CHECK(s.n == 4);
  CHECK(s.m_bar(0) == doctest::Approx(2.5));
  CHECK(s.m_bar(1) == doctest::Approx(2.0));
  // Omega(0,0) = population variance of psi1 = 1.25
  CHECK(s.Omega(0, 0) == doctest::Approx(1.25));
  CHECK(s.Omega(1, 1) == doctest::Approx(0.0));
  CHECK(s.Omega(0, 1) == doctest::Approx(0.0));
}

#include "nsi/gmm.hpp"

#include <cmath>

namespace nsi {

std::string to_string(Weighting w) {
  return w == Weighting::identity ? "identity" : "efficient";
}

Weighting weighting_from_string(const std::string& s) {
  if (s == "identity") return Weighting::identity;
  if (s == "efficient") return Weighting::efficient;
  throw ConfigError("unknown weighting '" + s + "'");
}

MomentSummary summarize_moments(const ScoreMatrix& scores) {
  const Eigen::Index n = scores.n();
  if (n < 2) throw InsufficientDataError("summarize_moments: need n >= 2");
  const Mat S = scores.stacked();
  MomentSummary ms;
  ms.n = n;
  ms.J = scores.J();
  ms.d_R = scores.d_R;
  ms.measurement_names = scores.measurement_names;
  ms.coefficient_names = scores.coefficient_names;
  ms.m_bar = S.colwise().mean();
  const Mat centered = S.rowwise() - ms.m_bar.transpose();
  ms.Omega = centered.transpose() * centered / static_cast<double>(n);
  return ms;
}

namespace {

double default_ridge(const Mat& Omega) {
  return 1e-8 * Omega.trace() / static_cast<double>(Omega.rows());
}

Mat weight_matrix(const Mat& Omega, Weighting weighting, double ridge) {
  if (weighting == Weighting::identity)
    return Mat::Identity(Omega.rows(), Omega.cols());
  Mat Om = Omega;
  Om.diagonal().array() += ridge >= 0.0 ? ridge : default_ridge(Omega);
  return spd_inverse(Om);
}

}  // namespace

GmmEstimate pool_gmm(const MomentSummary& summary, Weighting weighting,
                     double ridge) {
  const int J = summary.J;
  const int d_R = summary.d_R;
  if (J < 1) throw ValidationError("pool_gmm: need at least one measurement");

  if (J == 1) {
    // nothing to pool: return the raw moment mean bit-for-bit
    GmmEstimate est;
    est.weighting = weighting;
    est.coefficient_names = summary.coefficient_names;
    est.beta = summary.m_bar;
    est.cov = summary.Omega / static_cast<double>(summary.n);
    est.se = est.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    est.J_stat = 0.0;
    est.J_df = 0;
    est.J_pvalue = 1.0;
    est.per_measurement = summary.m_bar.transpose();
    return est;
  }

  const Mat W = weight_matrix(summary.Omega, weighting, ridge);
  Mat A(J * d_R, d_R);
  for (int j = 0; j < J; ++j)
    A.middleRows(j * d_R, d_R) = Mat::Identity(d_R, d_R);

  const Mat AtW = A.transpose() * W;
  const Mat L = spd_solve(AtW * A, AtW);  // aggregation matrix

  GmmEstimate est;
  est.weighting = weighting;
  est.coefficient_names = summary.coefficient_names;
  est.beta = L * summary.m_bar;
  est.cov = L * summary.Omega * L.transpose() / static_cast<double>(summary.n);
  est.se = est.cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  const Vec resid = summary.m_bar - A * est.beta;
  est.J_stat = static_cast<double>(summary.n) * resid.dot(W * resid);
  est.J_df = (J - 1) * d_R;
  est.J_pvalue = est.J_df > 0 ? chi2_survival(est.J_stat, est.J_df) : 1.0;
  if (J == 1) est.J_stat = 0.0;

  est.per_measurement.resize(J, d_R);
  for (int j = 0; j < J; ++j)
    est.per_measurement.row(j) = summary.m_bar.segment(j * d_R, d_R);
  return est;
}

GmmEstimate pool_per_coefficient(const MomentSummary& summary,
                                 Weighting weighting, double ridge) {
  const int J = summary.J;
  const int d_R = summary.d_R;
  if (J < 1)
    throw ValidationError("pool_per_coefficient: need at least one measurement");

  GmmEstimate est;
  est.weighting = weighting;
  est.coefficient_names = summary.coefficient_names;
  est.beta.resize(d_R);
  est.cov = Mat::Zero(d_R, d_R);
  est.J_stat = 0.0;
  est.J_df = (J - 1) * d_R;

  // per-coefficient aggregation rows, kept to fill cross-coefficient covariance
  Mat L_full = Mat::Zero(d_R, J * d_R);
  for (int l = 0; l < d_R; ++l) {
    Mat Om_l(J, J);
    Vec m_l(J);
    for (int j = 0; j < J; ++j) {
      m_l(j) = summary.m_bar(j * d_R + l);
      for (int j2 = 0; j2 < J; ++j2)
        Om_l(j, j2) = summary.Omega(j * d_R + l, j2 * d_R + l);
    }
    const Mat W = weight_matrix(Om_l, weighting, ridge);
    const Vec ones = Vec::Ones(J);
    const Vec w_row = W * ones / ones.dot(W * ones);  // scalar GMM weights
    est.beta(l) = w_row.dot(m_l);
    for (int j = 0; j < J; ++j) L_full(l, j * d_R + l) = w_row(j);
    const Vec resid = m_l - ones * est.beta(l);
    est.J_stat += static_cast<double>(summary.n) * resid.dot(W * resid);
  }
  est.cov = L_full * summary.Omega * L_full.transpose() /
            static_cast<double>(summary.n);
  est.se = est.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.J_pvalue = est.J_df > 0 ? chi2_survival(est.J_stat, est.J_df) : 1.0;
  if (J == 1) est.J_stat = 0.0;

  est.per_measurement.resize(J, d_R);
  for (int j = 0; j < J; ++j)
    est.per_measurement.row(j) = summary.m_bar.segment(j * d_R, d_R);
  return est;
}

WaldTest wald_equality_test(const GmmEstimate& est_a, const GmmEstimate& est_b,
                            int coefficient) {
  if (coefficient < 0 || coefficient >= est_a.beta.size() ||
      coefficient >= est_b.beta.size())
    throw ConfigError("wald_equality_test: coefficient index out of range");
  const double va = est_a.cov(coefficient, coefficient);
  const double vb = est_b.cov(coefficient, coefficient);
  if (va + vb <= 0.0)
    throw NumericalError("wald_equality_test: zero variance in both estimates");
  WaldTest t;
  const double gap = est_a.beta(coefficient) - est_b.beta(coefficient);
  t.stat = gap * gap / (va + vb);
  t.df = 1;
  t.p_value = chi2_survival(t.stat, 1);
  return t;
}

}  // namespace nsi

#include "nsi/diagnostics.hpp"

#include <cmath>

namespace nsi {

CompletenessCheck completeness_rank_check(const Mat& joint_counts) {
  const Eigen::Index k = joint_counts.rows();
  const Eigen::Index m = joint_counts.cols();
  if (k == 0 || m == 0)
    throw ValidationError("completeness_rank_check: empty table");
  if ((joint_counts.array() < 0.0).any())
    throw ValidationError("completeness_rank_check: negative counts");
  for (Eigen::Index i = 0; i < k; ++i)
    if (joint_counts.row(i).sum() <= 0.0)
      throw ValidationError("completeness_rank_check: empty row margin " +
                            std::to_string(i));
  for (Eigen::Index j = 0; j < m; ++j)
    if (joint_counts.col(j).sum() <= 0.0)
      throw ValidationError("completeness_rank_check: empty column margin " +
                            std::to_string(j));

  Mat P(k, m);
  for (Eigen::Index i = 0; i < k; ++i)
    P.row(i) = joint_counts.row(i) / joint_counts.row(i).sum();

  Eigen::JacobiSVD<Mat> svd(P);
  const Vec s = svd.singularValues();
  const double tol = 1e-8 * s(0);
  CompletenessCheck out;
  out.required_rank = static_cast<int>(k);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++out.rank;
  out.pass = out.rank == out.required_rank;
  return out;
}

double instrument_strength(const BridgeFit& fit) {
  const Mat Gc_is = spd_inverse_sqrt(fit.G_c);
  const Mat Gb_is = spd_inverse_sqrt(fit.G_b);
  const Mat Bt = Gc_is * fit.B * Gb_is;
  Eigen::JacobiSVD<Mat> svd(Bt);
  const Vec s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return std::min(1.0, std::max(0.0, smin));
}

double orthogonality_residual(const Vec& y_j_holdout, const Mat& W_holdout,
                              const Vec& alpha_holdout, const BridgeFit& bridge,
                              const NuisanceFit& nuisance) {
  const Eigen::Index n = y_j_holdout.size();
  if (W_holdout.rows() != n || alpha_holdout.size() != n)
    throw ValidationError("orthogonality_residual: length mismatch");
  const Mat b = bridge.phi_basis.evaluate(y_j_holdout);
  const Vec q = apply_q(bridge, nuisance.theta, W_holdout);
  const Vec diff = alpha_holdout - q;
  const Vec means = b.transpose() * diff / static_cast<double>(n);
  return means.cwiseAbs().maxCoeff();
}

double xi_objective_value(const BridgeFit& fit, const Vec& delta,
                          const Vec& riesz_values) {
  const double dn = static_cast<double>(fit.Phi_train.rows());
  const Vec a = fit.Phi_train.transpose() * riesz_values / dn;
  Mat D_inner = fit.G_c;
  D_inner.diagonal().array() += 2.0 * fit.hyper.gamma_q;
  const Vec Bd = fit.B * delta;
  const Vec DBd = spd_solve(D_inner, Mat(Bd));
  return 0.5 * Bd.dot(DBd) - a.dot(delta) +
         fit.hyper.gamma_xi * delta.squaredNorm();
}

}  // namespace nsi

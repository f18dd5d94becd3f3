#include "nsi/baselines.hpp"

#include "nsi/orthogonal_score.hpp"

#include <cmath>

namespace nsi {

namespace {

Mat covariance(const Mat& X) {
  const Mat centered = X.rowwise() - X.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(X.rows());
}

Vec inverse_cov_weights(const Mat& Sigma, std::vector<std::string>* warnings) {
  const Vec ones = Vec::Ones(Sigma.rows());
  Vec si;
  try {
    si = spd_solve(Sigma, Mat(ones));
  } catch (const NumericalError&) {
    if (warnings)
      warnings->push_back("singular covariance; ridge fallback applied");
    Mat S = Sigma;
    S.diagonal().array() += 1e-4 * std::max(Sigma.trace() / Sigma.rows(), 1e-12);
    si = spd_solve(S, Mat(ones));
  }
  return si / ones.dot(si);
}

}  // namespace

IndexFit pca_index(const Mat& Y, bool use_correlation) {
  const Eigen::Index J = Y.cols();
  if (J < 2) throw ValidationError("pca_index: need at least two measurements");
  Mat Ys = Y.rowwise() - Y.colwise().mean();
  if (use_correlation) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double sd =
          std::sqrt(Ys.col(j).squaredNorm() / static_cast<double>(Y.rows()));
      if (sd <= 0.0)
        throw ValidationError("pca_index: zero-variance column " +
                              std::to_string(j));
      Ys.col(j) /= sd;
    }
  }
  const Mat S = Ys.transpose() * Ys / static_cast<double>(Y.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  if (es.info() != Eigen::Success)
    throw NumericalError("pca_index: eigendecomposition failed");

  // documented tie-break: among (near-)leading eigenvectors, prefer the one
  // loading most on the first coordinate axis
  const Eigen::Index last = J - 1;
  const double top = es.eigenvalues()(last);
  Eigen::Index pick = last;
  for (Eigen::Index i = last; i >= 0; --i) {
    if (es.eigenvalues()(i) < top - 1e-12 * std::max(std::abs(top), 1.0)) break;
    if (std::abs(es.eigenvectors()(0, i)) >
        std::abs(es.eigenvectors()(0, pick)) + 1e-14)
      pick = i;
  }
  Vec w = es.eigenvectors().col(pick);
  // deterministic sign: first nonzero weight >= 0
  for (Eigen::Index j = 0; j < J; ++j) {
    if (std::abs(w(j)) > 1e-14) {
      if (w(j) < 0.0) w = -w;
      break;
    }
  }
  IndexFit fit;
  fit.kind = IndexKind::pca;
  fit.weights = w;
  fit.index_values = Ys * w;
  return fit;
}

IndexFit icw_index(const Mat& Y, const std::optional<Vec>& z,
                   std::vector<std::string>* warnings) {
  const Eigen::Index J = Y.cols();
  if (J < 1) throw ValidationError("icw_index: no measurements");
  IndexFit fit;
  fit.kind = IndexKind::icw;
  if (J == 1) {
    fit.weights = Vec::Ones(1);
    fit.index_values = Y.col(0);
    return fit;
  }

  // standardize by control-group moments when treatment is supplied
  Mat Ys(Y.rows(), J);
  for (Eigen::Index j = 0; j < J; ++j) {
    double mean = 0.0, var = 0.0;
    if (z) {
      double n0 = 0.0;
      for (Eigen::Index i = 0; i < Y.rows(); ++i)
        if ((*z)(i) == 0.0) {
          mean += Y(i, j);
          n0 += 1.0;
        }
      if (n0 < 2.0) throw InsufficientDataError("icw_index: control arm empty");
      mean /= n0;
      for (Eigen::Index i = 0; i < Y.rows(); ++i)
        if ((*z)(i) == 0.0) var += (Y(i, j) - mean) * (Y(i, j) - mean);
      var /= n0;
    } else {
      mean = Y.col(j).mean();
      var = (Y.col(j).array() - mean).square().sum() /
            static_cast<double>(Y.rows());
    }
    if (var <= 0.0)
      throw ValidationError("icw_index: zero-variance column " +
                            std::to_string(j));
    Ys.col(j) = (Y.col(j).array() - mean) / std::sqrt(var);
  }
  fit.weights = inverse_cov_weights(covariance(Ys), warnings);
  fit.index_values = Ys * fit.weights;
  return fit;
}

DiffInMeans index_diff_in_means(const Vec& index, const Vec& z, double pi) {
  const Eigen::Index n = index.size();
  if (z.size() != n) throw ValidationError("index_diff_in_means: length mismatch");
  const double zsum = z.sum();
  if (zsum <= 0.0 || zsum >= static_cast<double>(n))
    throw InsufficientDataError("index_diff_in_means: single-arm data");
  const Vec g = ht_transform(z, pi).cwiseProduct(index);
  DiffInMeans out;
  out.tau_hat = g.mean();
  const double var =
      (g.array() - out.tau_hat).square().sum() / static_cast<double>(n - 1);
  out.se = std::sqrt(var / static_cast<double>(n));
  return out;
}

WsiEstimate wsi_estimate(const Dataset& ds, const std::string& instrument,
                         std::optional<double> known_pi) {
  const auto& roles = ds.roles();
  if (roles.treatments.empty())
    throw ConfigError("wsi_estimate: a treatment column is required");
  const std::string instr =
      instrument.empty() ? roles.treatments.front() : instrument;
  const Vec& w = ds.col(instr);
  const Vec& y1 = ds.col(roles.benchmark);
  const double n = static_cast<double>(ds.n());

  auto cov_with_instr = [&](const Vec& v) {
    return ((v.array() - v.mean()) * (w.array() - w.mean())).sum() / n;
  };
  const double c1 = cov_with_instr(y1);
  const double sd1 = std::sqrt((y1.array() - y1.mean()).square().sum() / n);
  const double sdw = std::sqrt((w.array() - w.mean()).square().sum() / n);
  if (std::abs(c1) < 1e-8 * std::max(sd1 * sdw, 1e-300))
    throw NumericalError("wsi_estimate: instrument '" + instr +
                         "' is weak for the benchmark (|cov| ~ 0)");

  const Eigen::Index J = 1 + static_cast<Eigen::Index>(roles.measurements.size());
  WsiEstimate est;
  est.fit.kind = IndexKind::wsi;
  est.fit.lambdas = Vec::Ones(J);
  Mat T(ds.n(), J);
  T.col(0) = y1;
  for (Eigen::Index j = 1; j < J; ++j) {
    const Vec& yj = ds.col(roles.measurements[static_cast<std::size_t>(j - 1)]);
    const double lam = cov_with_instr(yj) / c1;
    if (std::abs(lam) < 1e-8)
      throw NumericalError("wsi_estimate: near-zero scaling for measurement '" +
                           roles.measurements[static_cast<std::size_t>(j - 1)] +
                           "'");
    est.fit.lambdas(j) = lam;
    T.col(j) = yj / lam;
  }
  est.fit.weights = inverse_cov_weights(covariance(T), nullptr);
  est.fit.index_values = T * est.fit.weights;

  const Vec& z = ds.col(roles.treatments.front());
  const double pi = known_pi ? *known_pi : z.mean();
  const DiffInMeans dm = index_diff_in_means(est.fit.index_values, z, pi);
  est.tau_hat = dm.tau_hat;
  est.se = dm.se;
  return est;
}

}  // namespace nsi

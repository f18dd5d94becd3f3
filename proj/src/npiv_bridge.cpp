#include "nsi/npiv_bridge.hpp"

#include <cmath>

namespace nsi {

bool HyperParams::resolved() const {
  return mu >= 0.0 && gamma_phi >= 0.0 && gamma_q >= 0.0 && gamma_xi >= 0.0 &&
         ridge_q >= 0.0;
}

void HyperParams::check_resolved() const {
  if (!resolved()) throw ConfigError("HyperParams: unresolved (negative) value");
  if (mu <= 0.0 && gamma_phi <= 0.0)
    throw ConfigError("HyperParams: need mu > 0 or gamma_phi > 0");
  if (gamma_q <= 0.0) throw ConfigError("HyperParams: need gamma_q > 0");
}

HyperParams resolve_hyper(HyperParams hyper, Eigen::Index n_train,
                          const Mat& G_b, const Mat& G_c) {
  const double root_n = std::sqrt(static_cast<double>(n_train));
  const double scale_b = G_b.trace() / static_cast<double>(G_b.rows());
  const double scale_c = G_c.trace() / static_cast<double>(G_c.rows());
  auto def = [&](double v, double scale) {
    return v >= 0.0 ? v : std::max(scale, 1e-12) / root_n;
  };
  hyper.mu = def(hyper.mu, scale_b);
  hyper.gamma_phi = def(hyper.gamma_phi, scale_b);
  hyper.gamma_q = def(hyper.gamma_q, scale_c);
  hyper.gamma_xi = def(hyper.gamma_xi, scale_b);
  hyper.ridge_q = def(hyper.ridge_q, scale_c);
  hyper.check_resolved();
  return hyper;
}

BridgeFit fit_bridge_minimax(const Vec& y_j, const Vec& y1, const Mat& W,
                             const BasisSpec& phi_spec, const BasisSpec& w_spec,
                             HyperParams hyper, std::uint64_t seed) {
  const Eigen::Index n = y_j.size();
  if (y1.size() != n || W.rows() != n)
    throw ValidationError("fit_bridge_minimax: length mismatch");

  // degenerate instruments fail fast rather than inside the solver
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    const double mean = W.col(j).mean();
    if ((W.col(j).array() - mean).square().sum() <= 0.0)
      throw NumericalError("fit_bridge_minimax: instrument column " +
                           std::to_string(j) + " is constant");
  }

  BridgeFit fit;
  fit.phi_basis = fit_basis(phi_spec, Mat(y_j), y1, mix_seed(seed, 1));
  fit.w_basis = fit_basis(w_spec, W, y1, mix_seed(seed, 2));

  const Eigen::Index p = fit.phi_basis.dimension();
  const Eigen::Index m = fit.w_basis.dimension();
  if (n < std::max(p, m))
    throw InsufficientDataError(
        "fit_bridge_minimax: fewer rows (" + std::to_string(n) +
        ") than basis dimension (" + std::to_string(std::max(p, m)) + ")");

  fit.Phi_train = fit.phi_basis.evaluate(Mat(y_j));
  fit.C_train = fit.w_basis.evaluate(W);
  const double dn = static_cast<double>(n);
  fit.G_b = fit.Phi_train.transpose() * fit.Phi_train / dn;
  fit.G_c = fit.C_train.transpose() * fit.C_train / dn;
  fit.B = fit.C_train.transpose() * fit.Phi_train / dn;
  fit.r = fit.C_train.transpose() * y1 / dn;

  fit.hyper = resolve_hyper(hyper, n, fit.G_b, fit.G_c);

  Mat D_inner = fit.G_c;
  D_inner.diagonal().array() += 2.0 * fit.hyper.gamma_q;
  const Mat DB = spd_solve(D_inner, fit.B);       // D * B
  const Vec Dr = spd_solve(D_inner, Mat(fit.r));  // D * r

  Mat M = fit.B.transpose() * DB + 2.0 * fit.hyper.mu * fit.G_b;
  M.diagonal().array() += 2.0 * fit.hyper.gamma_phi;
  fit.beta = spd_solve(M, Mat(fit.B.transpose() * Dr));
  if (!fit.beta.allFinite())
    throw NumericalError("fit_bridge_minimax: non-finite solution");
  return fit;
}

Vec fit_xi_minimax(const BridgeFit& fit, const Vec& riesz_values) {
  if (riesz_values.size() != fit.Phi_train.rows())
    throw ValidationError("fit_xi_minimax: riesz_values length mismatch");
  if (!riesz_values.allFinite())
    throw ValidationError("fit_xi_minimax: non-finite riesz values");
  const double dn = static_cast<double>(fit.Phi_train.rows());
  const Vec a = fit.Phi_train.transpose() * riesz_values / dn;

  Mat D_inner = fit.G_c;
  D_inner.diagonal().array() += 2.0 * fit.hyper.gamma_q;
  const Mat DB = spd_solve(D_inner, fit.B);

  Mat M = fit.B.transpose() * DB;
  M.diagonal().array() += 2.0 * fit.hyper.gamma_xi;
  return spd_solve(M, Mat(a));
}

Vec project_q(const BridgeFit& fit, const Vec& delta) {
  if (delta.size() != fit.B.cols())
    throw ValidationError("project_q: delta length mismatch");
  Mat G = fit.G_c;
  G.diagonal().array() += fit.hyper.ridge_q;
  return spd_solve(G, Mat(fit.B * delta));
}

Vec apply_bridge(const BridgeFit& fit, const Vec& y_values) {
  return fit.phi_basis.evaluate(y_values) * fit.beta;
}

Vec apply_q(const BridgeFit& fit, const Vec& theta, const Mat& W) {
  return fit.w_basis.evaluate(W) * theta;
}

nlohmann::json bridge_to_json(const BridgeFit& fit) {
  nlohmann::json j;
  j["phi_basis"] = fit.phi_basis.describe();
  j["w_basis"] = fit.w_basis.describe();
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  j["hyper"] = {{"mu", fit.hyper.mu},
                {"gamma_phi", fit.hyper.gamma_phi},
                {"gamma_q", fit.hyper.gamma_q},
                {"gamma_xi", fit.hyper.gamma_xi},
                {"ridge_q", fit.hyper.ridge_q}};
  return j;
}

}  // namespace nsi

#pragma once

#include "nsi/basis.hpp"
#include "nsi/common.hpp"

#include <cstdint>
#include <json.hpp>

namespace nsi {

// Regularization weights for the minimax first stage. Negative values mean
// "auto": resolved at fit time to n^(-1/2) times the trace average of the
// relevant Gram matrix.
struct HyperParams {
  double mu = -1.0;         // empirical second-moment penalty on phi
  double gamma_phi = -1.0;  // coefficient-norm penalty on phi
  double gamma_q = -1.0;    // coefficient-norm penalty on the critic
  double gamma_xi = -1.0;   // coefficient-norm penalty on xi
  double ridge_q = -1.0;    // ridge weight for the q-projection

  bool resolved() const;
  void check_resolved() const;
};

// Fitted measurement bridge phi(y) = b(y)' beta, with the empirical
// operator matrices retained for diagnostics and the xi/q stages.
struct BridgeFit {
  FittedBasis phi_basis;  // dictionary b over Y_j
  FittedBasis w_basis;    // critic dictionary c over W
  Vec beta;
  HyperParams hyper;  // resolved values

  Mat G_b;  // E_n[b b']
  Mat G_c;  // E_n[c c']
  Mat B;    // E_n[c b']  (dim c x dim b)
  Vec r;    // E_n[c Y1]

  // Training design matrices, kept for the xi fit and q projection.
  Mat Phi_train;  // n x dim b
  Mat C_train;    // n x dim c
};

struct NuisanceFit {
  Vec delta;  // xi coefficients on phi_basis
  Vec theta;  // q coefficients on w_basis
};

// Penalized minimax bridge fit in closed form. With
// D = (G_c + 2 gamma_q I)^-1 the saddle point of the empirical criterion is
//   beta = (B' D B + 2 mu G_b + 2 gamma_phi I)^-1 B' D r.
BridgeFit fit_bridge_minimax(const Vec& y_j, const Vec& y1, const Mat& W,
                             const BasisSpec& phi_spec, const BasisSpec& w_spec,
                             HyperParams hyper, std::uint64_t seed = 0);

// Auxiliary minimax fit for the debiasing nuisance xi, reusing the bridge's
// fitted dictionaries. With a = E_n[alpha(R) b(Y_j)]:
//   delta = (B' D B + 2 gamma_xi I)^-1 a.
Vec fit_xi_minimax(const BridgeFit& fit, const Vec& riesz_values);

// Ridge regression of xi(Y_j) on c(W): theta = (G_c + ridge I)^-1 B delta.
Vec project_q(const BridgeFit& fit, const Vec& delta);

Vec apply_bridge(const BridgeFit& fit, const Vec& y_values);

// q(W) = c(W)' theta on fresh data.
Vec apply_q(const BridgeFit& fit, const Vec& theta, const Mat& W);

nlohmann::json bridge_to_json(const BridgeFit& fit);

HyperParams resolve_hyper(HyperParams hyper, Eigen::Index n_train,
                          const Mat& G_b, const Mat& G_c);

}  // namespace nsi

// Test-only iterative saddle-point solver for the penalized minimax
// objectives. Deliberately independent of the closed-form solve in the
// library: the inner maximization runs plain gradient ascent and the outer
// minimization runs gradient descent on the max-function, so agreement with
// the closed form cross-checks the derivation.
#pragma once

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double power_lmax(const Mat& H) {
  Vec v = Vec::Ones(H.rows()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vec w = H * v;
    const double nl = w.norm();
    if (nl == 0.0) return 0.0;
    v = w / nl;
    lam = nl;
  }
  return lam;
}

// argmax_gamma v'gamma - 0.5 gamma' H gamma via gradient ascent
inline Vec inner_max(const Mat& H, const Vec& v, double lmax_H) {
  Vec gamma = Vec::Zero(v.size());
  const double step = 1.0 / lmax_H;
  for (int it = 0; it < 200000; ++it) {
    const Vec grad = v - H * gamma;
    if (grad.norm() < 1e-13) break;
    gamma += step * grad;
  }
  return gamma;
}

struct Problem {
  Mat Phi;  // n x p dictionary values b(Y_j)
  Mat C;    // n x m critic values c(W)
  Vec y1;   // benchmark outcome (bridge problem)
  double mu = 0.0;
  double gamma_phi = 0.0;
  double gamma_q = 0.0;
  double gamma_xi = 0.0;
};

// Saddle point of the empirical bridge criterion
//   min_beta max_gamma gamma'(B beta - r) - 0.5 gamma' G_c gamma
//            - gamma_q |gamma|^2 + mu beta' G_b beta + gamma_phi |beta|^2
inline Vec solve_bridge(const Problem& pr) {
  const double n = static_cast<double>(pr.Phi.rows());
  const Mat G_b = pr.Phi.transpose() * pr.Phi / n;
  const Mat G_c = pr.C.transpose() * pr.C / n;
  const Mat B = pr.C.transpose() * pr.Phi / n;
  const Vec r = pr.C.transpose() * pr.y1 / n;

  Mat H = G_c;
  H.diagonal().array() += 2.0 * pr.gamma_q;
  const double lmax_H = power_lmax(H);
  // crude Lipschitz bound for the outer gradient
  const double L = power_lmax(Mat(B.transpose() * B)) / (2.0 * pr.gamma_q) +
                   2.0 * pr.mu * power_lmax(G_b) + 2.0 * pr.gamma_phi + 1e-12;

  Vec beta = Vec::Zero(pr.Phi.cols());
  for (int it = 0; it < 200000; ++it) {
    const Vec gamma = inner_max(H, B * beta - r, lmax_H);
    const Vec grad =
        B.transpose() * gamma + 2.0 * pr.mu * (G_b * beta) + 2.0 * pr.gamma_phi * beta;
    if (grad.norm() < 1e-11) break;
    beta -= grad / L;
  }
  return beta;
}

// Saddle point of the xi criterion with linear term a = E_n[alpha b]
inline Vec solve_xi(const Problem& pr, const Vec& alpha) {
  const double n = static_cast<double>(pr.Phi.rows());
  const Mat G_c = pr.C.transpose() * pr.C / n;
  const Mat B = pr.C.transpose() * pr.Phi / n;
  const Vec a = pr.Phi.transpose() * alpha / n;

  Mat H = G_c;
  H.diagonal().array() += 2.0 * pr.gamma_q;
  const double lmax_H = power_lmax(H);
  const double L = power_lmax(Mat(B.transpose() * B)) / (2.0 * pr.gamma_q) +
                   2.0 * pr.gamma_xi + 1e-12;

  Vec delta = Vec::Zero(pr.Phi.cols());
  for (int it = 0; it < 200000; ++it) {
    const Vec gamma = inner_max(H, B * delta, lmax_H);
    const Vec grad = B.transpose() * gamma - a + 2.0 * pr.gamma_xi * delta;
    if (grad.norm() < 1e-11) break;
    delta -= grad / L;
  }
  return delta;
}

}  // namespace oracle

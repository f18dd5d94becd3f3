#pragma once

#include "nsi/npiv_bridge.hpp"
#include "nsi/orthogonal_score.hpp"

namespace nsi {

struct CompletenessCheck {
  int rank = 0;
  int required_rank = 0;
  bool pass = false;
};

// Discrete surrogate of the completeness condition: full row rank of the
// k x m conditional-probability matrix built from a contingency table of
// counts (rows = latent categories, columns = measurement categories).
CompletenessCheck completeness_rank_check(const Mat& joint_counts);

// Smallest singular value of G_c^{-1/2} B G_b^{-1/2}; values near zero signal
// a weakly identified first stage. Threshold 0.05 is the reporting convention.
double instrument_strength(const BridgeFit& fit);

inline constexpr double kWeakInstrumentThreshold = 0.05;

// max_k | E_holdout[(alpha(R) - q(W)) b_k(Y_j)] |
double orthogonality_residual(const Vec& y_j_holdout, const Mat& W_holdout,
                              const Vec& alpha_holdout, const BridgeFit& bridge,
                              const NuisanceFit& nuisance);

struct DiagnosticsReport {
  CompletenessCheck completeness;
  bool has_completeness = false;
  std::vector<std::pair<std::string, double>> instrument_strengths;
  std::vector<std::pair<std::string, double>> foc_residuals;
  std::vector<std::pair<std::string, double>> xi_objectives;
};

// Attained value of the xi-problem objective at the fitted coefficients.
double xi_objective_value(const BridgeFit& fit, const Vec& delta,
                          const Vec& riesz_values);

}  // namespace nsi

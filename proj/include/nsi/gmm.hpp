#pragma once

#include "nsi/orthogonal_score.hpp"

#include <string>
#include <vector>

namespace nsi {

enum class Weighting { identity, efficient };

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

struct MomentSummary {
  Vec m_bar;   // stacked means, length J * d_R
  Mat Omega;   // covariance of stacked per-observation scores
  Eigen::Index n = 0;
  int J = 0;
  int d_R = 1;
  std::vector<std::string> measurement_names;
  std::vector<std::string> coefficient_names;
};

struct GmmEstimate {
  Vec beta;       // length d_R
  Mat cov;        // d_R x d_R
  Vec se;
  double J_stat = 0.0;
  int J_df = 0;
  double J_pvalue = 1.0;
  Weighting weighting = Weighting::efficient;
  Mat per_measurement;  // J x d_R unpooled moment means
  std::vector<std::string> coefficient_names;
};

struct WaldTest {
  double stat = 0.0;
  int df = 1;
  double p_value = 1.0;
};

MomentSummary summarize_moments(const ScoreMatrix& scores);

// Closed-form linear GMM over the stacked moments with A = 1_J (x) I_dR.
// ridge < 0 selects the default 1e-8 * trace(Omega)/(J*d_R).
GmmEstimate pool_gmm(const MomentSummary& summary, Weighting weighting,
                     double ridge = -1.0);

// Scalar GMM per coefficient across the J measurement means, using the
// per-coefficient J x J sub-blocks of Omega.
GmmEstimate pool_per_coefficient(const MomentSummary& summary,
                                 Weighting weighting, double ridge = -1.0);

WaldTest wald_equality_test(const GmmEstimate& est_a, const GmmEstimate& est_b,
                            int coefficient = 0);

}  // namespace nsi

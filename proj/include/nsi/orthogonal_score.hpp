#pragma once

#include "nsi/data_model.hpp"
#include "nsi/npiv_bridge.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nsi {

// s(z) = z/pi - (1-z)/(1-pi)
Vec ht_transform(const Vec& z, double pi);

struct RieszWeights {
  Mat R_design;  // evaluation-row design, n_eval x d_R
  Mat M_hat;     // training-fold Gram E[R R']
  Mat alpha;     // n_eval x d_R, alpha_{il} = e_l' M^-1 R_i
};

RieszWeights compute_riesz_weights(const Mat& R_train, const Mat& R_eval,
                                   const std::vector<std::string>& names = {});

// How the target functional's Riesz representer is formed.
//   ht:         d_R = 1, alpha = s(Z) with the training-fold treated share —
//               the plain ALTE functional.
//   regression: R = (1, treatments..., covariates...), d_R = 1 + T + C.
enum class RieszMode { ht, regression };

struct ScoreOptions {
  RieszMode mode = RieszMode::ht;
  BasisSpec phi_spec;  // bridge dictionary over Y_j
  BasisSpec w_spec;    // critic dictionary over W
  HyperParams hyper;
  std::optional<double> known_pi;  // design probability; else fold share
  std::uint64_t seed = 0;
};

struct ScoreMatrix {
  std::vector<Mat> psi;  // one n x d_R matrix per measurement, benchmark first
  std::vector<std::string> measurement_names;  // benchmark first
  std::vector<std::string> coefficient_names;  // length d_R
  FoldAssignment folds;
  double pi = 0.0;  // full-sample treated share actually used (reporting)
  int d_R = 1;

  Eigen::Index n() const { return psi.empty() ? 0 : psi.front().rows(); }
  int J() const { return static_cast<int>(psi.size()); }
  Mat stacked() const;  // n x (J * d_R)
};

ScoreMatrix crossfit_scores(const Dataset& ds, const FoldAssignment& folds,
                            const ScoreOptions& opts);

}  // namespace nsi

#pragma once

#include "nsi/gmm.hpp"

namespace nsi {

BasisSpec default_phi_spec(BasisKind kind = BasisKind::polynomial);
BasisSpec default_w_spec();

struct NsiOptions {
  BasisSpec phi_spec = default_phi_spec();
  BasisSpec w_spec = default_w_spec();
  HyperParams hyper;
  int folds = 5;
  std::uint64_t seed = 0;
  Weighting weighting = Weighting::efficient;
  RieszMode mode = RieszMode::ht;
  std::optional<double> known_pi;
};

struct NsiResult {
  ScoreMatrix scores;
  MomentSummary summary;
  GmmEstimate estimate;
};

// Full estimator: fold assignment, cross-fitted scores, pooled GMM.
NsiResult run_nsi(const Dataset& ds, const NsiOptions& opts);

}  // namespace nsi

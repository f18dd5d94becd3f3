#include "nsi/pipeline.hpp"

namespace nsi {

BasisSpec default_phi_spec(BasisKind kind) {
  BasisSpec s;
  s.kind = kind;
  s.degree = 3;
  s.n_centers = 50;
  s.n_trees = 50;
  s.max_depth = 3;
  return s;
}

BasisSpec default_w_spec() {
  BasisSpec s;
  s.kind = BasisKind::polynomial;
  s.degree = 2;  // includes pairwise interactions across instrument columns
  return s;
}

NsiResult run_nsi(const Dataset& ds, const NsiOptions& opts) {
  const FoldAssignment folds = assign_folds(ds.n(), opts.folds, opts.seed);
  ScoreOptions so;
  so.mode = opts.mode;
  so.phi_spec = opts.phi_spec;
  so.w_spec = opts.w_spec;
  so.hyper = opts.hyper;
  so.known_pi = opts.known_pi;
  so.seed = opts.seed;

  NsiResult res;
  res.scores = crossfit_scores(ds, folds, so);
  res.summary = summarize_moments(res.scores);
  res.estimate = pool_gmm(res.summary, opts.weighting);
  return res;
}

}  // namespace nsi

#include "nsi/orthogonal_score.hpp"

#include <cmath>

namespace nsi {

Vec ht_transform(const Vec& z, double pi) {
  if (!(pi > 0.0 && pi < 1.0))
    throw ValidationError("ht_transform: pi must lie in (0,1), got " +
                          std::to_string(pi));
  return z.array() / pi - (1.0 - z.array()) / (1.0 - pi);
}

RieszWeights compute_riesz_weights(const Mat& R_train, const Mat& R_eval,
                                   const std::vector<std::string>& names) {
  if (R_train.cols() != R_eval.cols())
    throw ValidationError("compute_riesz_weights: design width mismatch");
  RieszWeights rw;
  rw.R_design = R_eval;
  rw.M_hat = R_train.transpose() * R_train / static_cast<double>(R_train.rows());

  // name collinear columns instead of a bare singular-matrix error
  Eigen::FullPivLU<Mat> lu(rw.M_hat);
  lu.setThreshold(1e-10);
  if (lu.rank() < rw.M_hat.rows()) {
    std::string msg = "compute_riesz_weights: regressor Gram is rank-deficient";
    if (!names.empty()) {
      msg += " (columns:";
      for (const auto& n : names) msg += " " + n;
      msg += ")";
    }
    throw NumericalError(msg);
  }
  rw.alpha = R_eval * spd_inverse(rw.M_hat);  // M_hat symmetric
  return rw;
}

Mat ScoreMatrix::stacked() const {
  Mat out(n(), static_cast<Eigen::Index>(psi.size()) * d_R);
  for (std::size_t j = 0; j < psi.size(); ++j)
    out.middleCols(static_cast<Eigen::Index>(j) * d_R, d_R) = psi[j];
  return out;
}

namespace {

struct FoldContext {
  Mat alpha_train;  // n_train x d_R
  Mat alpha_eval;   // n_eval x d_R
};

FoldContext make_riesz(const Dataset& ds, const std::vector<int>& train,
                       const std::vector<int>& eval_rows,
                       const ScoreOptions& opts) {
  FoldContext ctx;
  const auto& roles = ds.roles();
  if (opts.mode == RieszMode::ht) {
    if (roles.treatments.empty())
      throw ConfigError("crossfit_scores: HT mode requires a treatment column");
    const Vec& z = ds.col(roles.treatments.front());
    Vec z_train(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) z_train(static_cast<Eigen::Index>(i)) = z(train[i]);
    const double pi = opts.known_pi ? *opts.known_pi : z_train.mean();
    Vec z_eval(static_cast<Eigen::Index>(eval_rows.size()));
    for (std::size_t i = 0; i < eval_rows.size(); ++i) z_eval(static_cast<Eigen::Index>(i)) = z(eval_rows[i]);
    ctx.alpha_train = ht_transform(z_train, pi);
    ctx.alpha_eval = ht_transform(z_eval, pi);
    return ctx;
  }

  std::vector<std::string> reg_names;
  for (const auto& c : roles.treatments) reg_names.push_back(c);
  for (const auto& c : roles.covariates) reg_names.push_back(c);
  const Eigen::Index d_R = 1 + static_cast<Eigen::Index>(reg_names.size());
  auto design = [&](const std::vector<int>& rows) {
    Mat R(static_cast<Eigen::Index>(rows.size()), d_R);
    R.col(0).setOnes();
    for (std::size_t c = 0; c < reg_names.size(); ++c) {
      const Vec& v = ds.col(reg_names[c]);
      for (std::size_t i = 0; i < rows.size(); ++i)
        R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c) + 1) = v(rows[i]);
    }
    return R;
  };
  std::vector<std::string> names = {"intercept"};
  for (const auto& c : reg_names) names.push_back(c);
  const Mat R_train = design(train);
  ctx.alpha_train = compute_riesz_weights(R_train, R_train, names).alpha;
  ctx.alpha_eval = compute_riesz_weights(R_train, design(eval_rows), names).alpha;
  return ctx;
}

Vec subset(const Vec& v, const std::vector<int>& rows) {
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

Mat subset_cols(const Dataset& ds, const std::vector<std::string>& cols,
                const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()),
          static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Vec& v = ds.col(cols[c]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v(rows[i]);
  }
  return out;
}

}  // namespace

ScoreMatrix crossfit_scores(const Dataset& ds, const FoldAssignment& folds,
                            const ScoreOptions& opts) {
  const auto& roles = ds.roles();
  const Vec& y1 = ds.col(roles.benchmark);

  ScoreMatrix sm;
  sm.folds = folds;
  sm.measurement_names.push_back(roles.benchmark);
  for (const auto& m : roles.measurements) sm.measurement_names.push_back(m);

  if (opts.mode == RieszMode::ht) {
    sm.d_R = 1;
    sm.coefficient_names = {"tau"};
  } else {
    sm.d_R = 1 + static_cast<int>(roles.treatments.size() +
                                  roles.covariates.size());
    sm.coefficient_names.push_back("intercept");
    for (const auto& c : roles.treatments) sm.coefficient_names.push_back(c);
    for (const auto& c : roles.covariates) sm.coefficient_names.push_back(c);
  }
  if (!roles.treatments.empty()) {
    sm.pi = opts.known_pi ? *opts.known_pi
                          : ds.col(roles.treatments.front()).mean();
  }

  const int J = 1 + static_cast<int>(roles.measurements.size());
  sm.psi.assign(static_cast<std::size_t>(J), Mat::Zero(ds.n(), sm.d_R));

  for (int k = 1; k <= folds.K; ++k) {
    const std::vector<int> train = folds.complement(k);
    const std::vector<int> eval_rows = folds.fold(k);
    const FoldContext ctx = make_riesz(ds, train, eval_rows, opts);
    const Vec y1_train = subset(y1, train);
    const Vec y1_eval = subset(y1, eval_rows);

    // benchmark: identity bridge, no debiasing term
    for (int l = 0; l < sm.d_R; ++l)
      for (std::size_t i = 0; i < eval_rows.size(); ++i)
        sm.psi[0](eval_rows[i], l) =
            ctx.alpha_eval(static_cast<Eigen::Index>(i), l) * y1_eval(static_cast<Eigen::Index>(i));

    for (std::size_t jm = 0; jm < roles.measurements.size(); ++jm) {
      const std::string& mname = roles.measurements[jm];
      try {
        const std::vector<std::string> w_cols = ds.instruments_for(mname);
        const Vec yj_train = subset(ds.col(mname), train);
        const Vec yj_eval = subset(ds.col(mname), eval_rows);
        const Mat W_train = subset_cols(ds, w_cols, train);
        const Mat W_eval = subset_cols(ds, w_cols, eval_rows);

        const BridgeFit fit = fit_bridge_minimax(
            yj_train, y1_train, W_train, opts.phi_spec, opts.w_spec, opts.hyper,
            mix_seed(opts.seed, static_cast<std::uint64_t>(k) * 1000 + jm));
        const Vec phi_eval = apply_bridge(fit, yj_eval);

        for (int l = 0; l < sm.d_R; ++l) {
          const Vec delta = fit_xi_minimax(fit, ctx.alpha_train.col(l));
          const Vec theta = project_q(fit, delta);
          const Vec q_eval = apply_q(fit, theta, W_eval);
          for (std::size_t i = 0; i < eval_rows.size(); ++i) {
            const Eigen::Index ii = static_cast<Eigen::Index>(i);
            sm.psi[jm + 1](eval_rows[i], l) =
                ctx.alpha_eval(ii, l) * phi_eval(ii) +
                q_eval(ii) * (y1_eval(ii) - phi_eval(ii));
          }
        }
      } catch (const Error& e) {
        const std::string label = "[fold " + std::to_string(k) +
                                  ", measurement " + mname + "] " + e.what();
        if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError(label);
        if (dynamic_cast<const InsufficientDataError*>(&e))
          throw InsufficientDataError(label);
        if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(label);
        throw ValidationError(label);
      }
    }
  }

  for (const Mat& p : sm.psi)
    if (!p.allFinite())
      throw NumericalError("crossfit_scores: non-finite score entries");
  return sm;
}

}  // namespace nsi

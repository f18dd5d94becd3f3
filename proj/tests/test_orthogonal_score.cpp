#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsi/orthogonal_score.hpp"
#include "nsi/simulation.hpp"

#include <random>

using namespace nsi;

namespace {

Dataset small_study(Eigen::Index n, std::uint64_t seed, double lambda = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unif;
  Vec y1(n), y2(n), z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = unif(rng) < 0.5 ? 1.0 : 0.0;
    const double eta = nd(rng) + 0.8 * z(i);
    y1(i) = eta + 0.4 * nd(rng);
    y2(i) = lambda * eta + 0.4 * nd(rng);
  }
  ColumnRoles roles;
  roles.benchmark = "y1";
  roles.measurements = {"y2"};
  roles.treatments = {"z"};
  return Dataset({"y1", "y2", "z"}, {y1, y2, z}, roles);
}

ScoreOptions ht_options() {
  ScoreOptions o;
  o.mode = RieszMode::ht;
  o.phi_spec.degree = 3;
  o.w_spec.degree = 2;
  return o;
}

}  // namespace

TEST_CASE("ht_transform plug-in values") {
  Vec z(2);
  z << 1, 0;
  const Vec s = ht_transform(z, 0.5);
  CHECK(s(0) == doctest::Approx(2.0));
  CHECK(s(1) == doctest::Approx(-2.0));
  CHECK(s.mean() == doctest::Approx(0.0));

  const Vec s2 = ht_transform(z, 0.25);
  CHECK(s2(0) == doctest::Approx(4.0));
  CHECK(s2(1) == doctest::Approx(-4.0 / 3.0));

  CHECK_THROWS_AS(ht_transform(z, 0.0), ValidationError);
  CHECK_THROWS_AS(ht_transform(z, 1.0), ValidationError);
}

TEST_CASE("riesz weight for (1, Z) equals the HT transform") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng() % 200);
    Vec z(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = (rng() % 4 == 0) ? 1.0 : 0.0;
    } while (z.sum() == 0.0 || z.sum() == static_cast<double>(n));
    Mat R(n, 2);
    R.col(0).setOnes();
    R.col(1) = z;
    const RieszWeights rw = compute_riesz_weights(R, R);
    const Vec s = ht_transform(z, z.mean());
    CHECK((rw.alpha.col(1) - s).cwiseAbs().maxCoeff() < 1e-10);

    // hand-inverted 2x2 Gram oracle for the treatment coefficient
    const double pi = z.mean();
    const double det = pi - pi * pi;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double hand = (-pi + z(i)) / det;
      CHECK(rw.alpha(i, 1) == doctest::Approx(hand).epsilon(1e-10));
    }
    // training-fold identity E[R alpha'] = I
    const Mat cross = R.transpose() * rw.alpha / static_cast<double>(n);
    CHECK((cross - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("intercept-only riesz weight is one") {
  Mat R = Mat::Ones(15, 1);
  const RieszWeights rw = compute_riesz_weights(R, R);
  CHECK((rw.alpha.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("collinear regressors raise a rank error naming columns") {
  Mat R(10, 3);
  R.col(0).setOnes();
  for (int i = 0; i < 10; ++i) R(i, 1) = i;
  R.col(2) = R.col(1);
  CHECK_THROWS_WITH_AS(compute_riesz_weights(R, R, {"intercept", "x", "x_dup"}),
                       doctest::Contains("x_dup"), NumericalError);
}

TEST_CASE("benchmark scores are fold-wise HT products") {
  const Dataset ds = small_study(120, 3);
  const FoldAssignment folds = assign_folds(ds.n(), 4, 9);
  const ScoreMatrix sm = crossfit_scores(ds, folds, ht_options());
  REQUIRE(sm.d_R == 1);
  const Vec& y1 = ds.col("y1");
  const Vec& z = ds.col("z");
  for (int k = 1; k <= folds.K; ++k) {
    double pi_train = 0.0;
    const auto train = folds.complement(k);
    for (int i : train) pi_train += z(i);
    pi_train /= static_cast<double>(train.size());
    for (int i : folds.fold(k)) {
      const double s = z(i) == 1.0 ? 1.0 / pi_train : -1.0 / (1.0 - pi_train);
      CHECK(sm.psi[0](i, 0) == doctest::Approx(s * y1(i)).epsilon(1e-12));
    }
  }
}

TEST_CASE("duplicate benchmark measurement gives matching score means") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unif;
  const Eigen::Index n = 2000;
  Vec y1(n), z(n), x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = unif(rng) < 0.5 ? 1.0 : 0.0;
    x(i) = nd(rng);
    y1(i) = 0.9 * x(i) + nd(rng) + 0.8 * z(i);
  }
  ColumnRoles roles;
  roles.benchmark = "y1";
  roles.measurements = {"y2"};
  roles.treatments = {"z"};
  roles.covariates = {"x"};
  const Dataset ds({"y1", "y2", "z", "x"}, {y1, y1, z, x}, roles);
  const ScoreMatrix sm =
      crossfit_scores(ds, assign_folds(n, 5, 5), ht_options());
  const double m1 = sm.psi[0].col(0).mean();
  const double m2 = sm.psi[1].col(0).mean();
  const double se2 =
      std::sqrt((sm.psi[1].col(0).array() - m2).square().sum() / (n * (n - 1.0)));
  CHECK(std::abs(m1 - m2) < 2.0 * se2);
}

TEST_CASE("fold relabeling leaves other folds' scores unchanged") {
  const Dataset ds = small_study(150, 6);
  FoldAssignment fa = assign_folds(ds.n(), 5, 11);
  FoldAssignment swapped = fa;
  for (auto& f : swapped.fold_of) {
    if (f == 1)
      f = 2;
    else if (f == 2)
      f = 1;
  }
  const ScoreMatrix a = crossfit_scores(ds, fa, ht_options());
  const ScoreMatrix b = crossfit_scores(ds, swapped, ht_options());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (fa.fold_of[static_cast<std::size_t>(i)] > 2) {
      CHECK(a.psi[0](i, 0) == b.psi[0](i, 0));
      CHECK(a.psi[1](i, 0) == b.psi[1](i, 0));
    }
  }
}

TEST_CASE("regression mode produces intercept + treatment coefficients") {
  const Dataset ds = small_study(200, 7);
  ScoreOptions o = ht_options();
  o.mode = RieszMode::regression;
  const ScoreMatrix sm = crossfit_scores(ds, assign_folds(ds.n(), 5, 1), o);
  CHECK(sm.d_R == 2);
  CHECK(sm.coefficient_names ==
        std::vector<std::string>({"intercept", "z"}));
  CHECK(sm.stacked().cols() == 4);
}

TEST_CASE("nuisance perturbations move mean scores only second order") {
  // orthogonality surrogate: epsilon-size coefficient shifts vs. a direct
  // epsilon shift of the outcome column
  const Dataset ds = small_study(1200, 8);
  const FoldAssignment folds = assign_folds(ds.n(), 2, 3);
  const ScoreOptions o = ht_options();
  const auto train = folds.complement(1);
  const auto eval_rows = folds.fold(1);
  const Dataset tr = ds.rows(train);
  const Dataset ev = ds.rows(eval_rows);

  const double pi = tr.col("z").mean();
  const BridgeFit fit =
      fit_bridge_minimax(tr.col("y2"), tr.col("y1"), Mat(tr.col("z")),
                         o.phi_spec, o.w_spec, o.hyper, 1);
  const Vec delta = fit_xi_minimax(fit, ht_transform(tr.col("z"), pi));
  const Vec theta = project_q(fit, delta);
  const Vec alpha_ev = ht_transform(ev.col("z"), pi);
  const Vec q_ev = apply_q(fit, theta, Mat(ev.col("z")));

  // shifting bridge coefficient k moves the mean score by
  // eps * E_holdout[(alpha - q) b_k]; without the q correction the
  // sensitivity would be eps * E_holdout[alpha b_k]
  const Mat b_ev = fit.phi_basis.evaluate(ev.col("y2"));
  const double n_ev = static_cast<double>(b_ev.rows());
  const Vec sens_debiased =
      b_ev.transpose() * Vec(alpha_ev - q_ev) / n_ev;
  const Vec sens_raw = b_ev.transpose() * alpha_ev / n_ev;
  CHECK(sens_debiased.cwiseAbs().maxCoeff() <
        0.5 * sens_raw.cwiseAbs().maxCoeff());
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsi/simulation.hpp"

using namespace nsi;

TEST_CASE("degenerate noise makes every linear measurement a multiple of eta") {
  DgpSpec spec = DgpSpec::linear(200, {1.0, 2.0, 3.0}, 42);
  spec.noise_sd = 0.0;
  spec.sigma_u = 0.0;
  const Study st = generate_study(spec, StudyVariant::A);
  const Vec& y1 = st.ds.col("y1");
  CHECK((st.ds.col("y2") - 2.0 * y1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((st.ds.col("y3") - 3.0 * y1).cwiseAbs().maxCoeff() < 1e-12);
  // with u and noise off, eta is a deterministic function of x and z
  const Vec& x = st.ds.col("x");
  const Vec& z = st.ds.col("z");
  for (Eigen::Index i = 0; i < st.ds.n(); ++i) {
    const double eta = 0.9 * x(i) + 0.3 * x(i) * x(i) +
                       z(i) * (0.8 + 0.3 * x(i));
    CHECK(y1(i) == doctest::Approx(eta).epsilon(1e-12));
  }
}

TEST_CASE("two-study defaults carry the intended target effect") {
  const DgpSpec spec = DgpSpec::two_study(400, 7);
  const Study a = generate_study(spec, StudyVariant::A);
  CHECK(a.true_alte == doctest::Approx(0.8));
  CHECK(a.ds.n() == 400);
  CHECK(a.ds.roles().benchmark == "y1");
  CHECK(a.ds.roles().measurements == std::vector<std::string>({"y2", "y3"}));
  CHECK(a.ds.roles().treatments == std::vector<std::string>({"z"}));
  CHECK(a.ds.roles().covariates == std::vector<std::string>({"x"}));
}

TEST_CASE("variants share the benchmark, treatment, and covariate draws") {
  const DgpSpec spec = DgpSpec::two_study(600, 13);
  const Study a = generate_study(spec, StudyVariant::A);
  const Study b = generate_study(spec, StudyVariant::B);
  CHECK((a.ds.col("y1") - b.ds.col("y1")).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.ds.col("z") - b.ds.col("z")).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.ds.col("x") - b.ds.col("x")).cwiseAbs().maxCoeff() == 0.0);
  // auxiliary measurements differ between codings
  CHECK((a.ds.col("y2") - b.ds.col("y2")).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("generation is deterministic in the seed") {
  const DgpSpec spec = DgpSpec::two_study(300, 5);
  const Study a1 = generate_study(spec, StudyVariant::A);
  const Study a2 = generate_study(spec, StudyVariant::A);
  for (const auto& name : a1.ds.names())
    CHECK((a1.ds.col(name) - a2.ds.col(name)).cwiseAbs().maxCoeff() == 0.0);
  DgpSpec other = spec;
  other.seed = 6;
  const Study a3 = generate_study(other, StudyVariant::A);
  CHECK((a1.ds.col("y1") - a3.ds.col("y1")).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("first map must be the identity") {
  DgpSpec spec = DgpSpec::two_study(100, 1);
  spec.maps_A[0] = DgpSpec::make_vec({0.0, 2.0});
  CHECK_THROWS_AS(generate_study(spec, StudyVariant::A), ConfigError);
}

TEST_CASE("estimator names round-trip") {
  for (EstimatorKind k : {EstimatorKind::pca, EstimatorKind::icw,
                          EstimatorKind::wsi, EstimatorKind::nsi})
    CHECK(estimator_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(estimator_from_string("ols"), ConfigError);
}

TEST_CASE("single-replication monte carlo runs and fills the record") {
  const DgpSpec spec = DgpSpec::two_study(400, 3);
  const McResult mc = run_monte_carlo(spec, EstimatorKind::wsi, 1, 21);
  REQUIRE(mc.reps.size() == 1);
  CHECK(mc.failures == 0);
  const RepRecord& r = mc.reps[0];
  CHECK(r.ok);
  CHECK(r.se_a > 0.0);
  CHECK(r.se_b > 0.0);
  CHECK(r.gap == doctest::Approx(std::abs(r.tau_a - r.tau_b)));
  CHECK(r.wald_p >= 0.0);
  CHECK(r.wald_p <= 1.0);
  CHECK(mc.mean_gap == doctest::Approx(r.gap));
}

TEST_CASE("identical variant maps give zero gap and no rejections") {
  DgpSpec spec = DgpSpec::two_study(400, 9);
  spec.maps_B = spec.maps_A;  // self-comparison
  spec.noise_scale_B = spec.noise_scale_A;
  const McResult mc = run_monte_carlo(spec, EstimatorKind::icw, 3, 31);
  for (const RepRecord& r : mc.reps) {
    REQUIRE(r.ok);
    CHECK(r.gap == doctest::Approx(0.0));
    CHECK(r.wald_p == doctest::Approx(1.0));
  }
  CHECK(mc.rejection_rate == doctest::Approx(0.0));
}

TEST_CASE("monte carlo results are reproducible") {
  const DgpSpec spec = DgpSpec::two_study(300, 2);
  const McResult a = run_monte_carlo(spec, EstimatorKind::pca, 4, 77);
  const McResult b = run_monte_carlo(spec, EstimatorKind::pca, 4, 77);
  REQUIRE(a.reps.size() == b.reps.size());
  for (std::size_t i = 0; i < a.reps.size(); ++i) {
    CHECK(a.reps[i].tau_a == b.reps[i].tau_a);
    CHECK(a.reps[i].tau_b == b.reps[i].tau_b);
    CHECK(a.reps[i].wald_p == b.reps[i].wald_p);
  }
  CHECK(a.mean_gap == b.mean_gap);
}

TEST_CASE("table summary keeps the canonical estimator order") {
  std::map<std::string, McResult> results;
  McResult r1;
  r1.mean_gap = 0.2;
  r1.rejection_rate = 0.5;
  McResult r2;
  r2.mean_gap = 0.05;
  r2.rejection_rate = 0.04;
  results["NSI"] = r2;
  results["PCA"] = r1;
  const auto table = summarize_table1(results);
  REQUIRE(table["rows"].size() == 2);
  CHECK(table["rows"][0]["estimator"] == "PCA");
  CHECK(table["rows"][1]["estimator"] == "NSI");
  CHECK(table["rows"][1]["mean_gap"] == doctest::Approx(0.05));
}

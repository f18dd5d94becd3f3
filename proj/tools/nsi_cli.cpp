// Batch front end: estimate | simulate | compare | diagnose.
// All outputs are pure functions of (config file, input files, flags).

#include <CLI11.hpp>
#include <json.hpp>

#include "nsi/diagnostics.hpp"
#include "nsi/simulation.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

struct CliOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> reps;
  std::optional<int> folds;
  std::optional<std::string> weighting;
  std::vector<std::string> estimators;
};

ordered_json load_config(const CliOverrides& ov) {
  ordered_json cfg = ordered_json::object();
  if (!ov.config_path.empty()) {
    std::ifstream in(ov.config_path);
    if (!in)
      throw nsi::ConfigError("cannot open config file '" + ov.config_path + "'");
    try {
      cfg = ordered_json::parse(in);
    } catch (const std::exception& e) {
      throw nsi::ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  // flags win over file values
  if (ov.seed) cfg["seed"] = *ov.seed;
  if (ov.out) cfg["out"] = *ov.out;
  if (ov.reps) cfg["reps"] = *ov.reps;
  if (ov.folds) cfg["folds"] = *ov.folds;
  if (ov.weighting) cfg["weighting"] = *ov.weighting;
  if (!ov.estimators.empty()) cfg["estimators"] = ov.estimators;
  return cfg;
}

std::uint64_t require_seed(const ordered_json& cfg) {
  if (!cfg.contains("seed"))
    throw nsi::ConfigError("a seed is required (config \"seed\" or --seed)");
  return cfg["seed"].get<std::uint64_t>();
}

fs::path out_dir(const ordered_json& cfg) {
  const std::string out = cfg.value("out", std::string("."));
  fs::create_directories(out);
  return out;
}

nsi::ColumnRoles parse_roles(const ordered_json& cfg) {
  if (!cfg.contains("roles"))
    throw nsi::ConfigError("config is missing \"roles\"");
  const auto& r = cfg["roles"];
  nsi::ColumnRoles roles;
  roles.benchmark = r.value("benchmark", std::string());
  if (roles.benchmark.empty())
    throw nsi::ConfigError("roles.benchmark is required");
  roles.measurements = r.value("measurements", std::vector<std::string>{});
  roles.treatments = r.value("treatments", std::vector<std::string>{});
  roles.covariates = r.value("covariates", std::vector<std::string>{});
  roles.instruments = r.value("instruments", std::vector<std::string>{});
  return roles;
}

nsi::HyperParams parse_hyper(const ordered_json& cfg) {
  nsi::HyperParams h;
  if (cfg.contains("hyper")) {
    const auto& j = cfg["hyper"];
    h.mu = j.value("mu", -1.0);
    h.gamma_phi = j.value("gamma_phi", -1.0);
    h.gamma_q = j.value("gamma_q", -1.0);
    h.gamma_xi = j.value("gamma_xi", -1.0);
    h.ridge_q = j.value("ridge_q", -1.0);
  }
  return h;
}

nsi::BasisSpec parse_basis(const ordered_json& j, nsi::BasisSpec base) {
  if (j.contains("kind"))
    base.kind = nsi::basis_kind_from_string(j["kind"].get<std::string>());
  base.degree = j.value("degree", base.degree);
  base.n_centers = j.value("n_centers", base.n_centers);
  base.bandwidth = j.value("bandwidth", base.bandwidth);
  base.n_trees = j.value("n_trees", base.n_trees);
  base.max_depth = j.value("max_depth", base.max_depth);
  base.include_intercept = j.value("include_intercept", base.include_intercept);
  base.standardize = j.value("standardize", base.standardize);
  return base;
}

ordered_json resolved_config(const ordered_json& cfg, const nsi::NsiOptions& o) {
  ordered_json j = cfg;
  j["resolved"] = {{"folds", o.folds},
                   {"weighting", nsi::to_string(o.weighting)},
                   {"hyper",
                    {{"mu", o.hyper.mu},
                     {"gamma_phi", o.hyper.gamma_phi},
                     {"gamma_q", o.hyper.gamma_q},
                     {"gamma_xi", o.hyper.gamma_xi},
                     {"ridge_q", o.hyper.ridge_q}}},
                   {"phi_degree", o.phi_spec.degree},
                   {"w_degree", o.w_spec.degree}};
  return j;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nsi::ConfigError("cannot write '" + path.string() + "'");
  out << contents;
}

void write_scores_csv(const fs::path& path, const nsi::ScoreMatrix& scores) {
  std::string csv;
  for (int j = 0; j < scores.J(); ++j)
    for (int l = 0; l < scores.d_R; ++l) {
      if (j || l) csv += ',';
      csv += "psi_" + scores.measurement_names[static_cast<std::size_t>(j)] +
             "_" + scores.coefficient_names[static_cast<std::size_t>(l)];
    }
  csv += '\n';
  for (Eigen::Index i = 0; i < scores.n(); ++i) {
    for (int j = 0; j < scores.J(); ++j)
      for (int l = 0; l < scores.d_R; ++l) {
        if (j || l) csv += ',';
        csv += fmt_double(scores.psi[static_cast<std::size_t>(j)](i, l));
      }
    csv += '\n';
  }
  write_file(path, csv);
}

// split-half first-stage diagnostics for one measurement
ordered_json measurement_diagnostics(const nsi::Dataset& ds,
                                     const std::string& mname,
                                     const nsi::NsiOptions& opts) {
  const nsi::FoldAssignment fa = nsi::assign_folds(ds.n(), 2, opts.seed);
  const std::vector<int> train = fa.fold(1);
  const std::vector<int> holdout = fa.fold(2);
  const nsi::Dataset train_ds = ds.rows(train);
  const nsi::Dataset hold_ds = ds.rows(holdout);
  const auto w_cols = ds.instruments_for(mname);

  const nsi::BridgeFit fit = nsi::fit_bridge_minimax(
      train_ds.col(mname), train_ds.col(ds.roles().benchmark),
      train_ds.matrix(w_cols), opts.phi_spec, opts.w_spec, opts.hyper,
      opts.seed);

  const nsi::Vec& z_tr = train_ds.col(ds.roles().treatments.front());
  const double pi = opts.known_pi ? *opts.known_pi : z_tr.mean();
  const nsi::Vec alpha_tr = nsi::ht_transform(z_tr, pi);
  nsi::NuisanceFit nf;
  nf.delta = nsi::fit_xi_minimax(fit, alpha_tr);
  nf.theta = nsi::project_q(fit, nf.delta);

  const nsi::Vec alpha_ho =
      nsi::ht_transform(hold_ds.col(ds.roles().treatments.front()), pi);
  const double strength = nsi::instrument_strength(fit);
  ordered_json j;
  j["measurement"] = mname;
  j["instrument_strength"] = strength;
  j["weak"] = strength < nsi::kWeakInstrumentThreshold;
  j["foc_residual"] = nsi::orthogonality_residual(
      hold_ds.col(mname), hold_ds.matrix(w_cols), alpha_ho, fit, nf);
  j["xi_objective"] = nsi::xi_objective_value(fit, nf.delta, alpha_tr);
  return j;
}

int cmd_estimate(const CliOverrides& ov) {
  const ordered_json cfg = load_config(ov);
  const std::uint64_t seed = require_seed(cfg);
  if (!cfg.contains("input"))
    throw nsi::ConfigError("config is missing \"input\"");
  const nsi::ColumnRoles roles = parse_roles(cfg);
  const nsi::Dataset ds = nsi::load_csv(cfg["input"].get<std::string>(), roles);

  nsi::NsiOptions base;
  base.seed = seed;
  base.folds = cfg.value("folds", 5);
  base.weighting =
      nsi::weighting_from_string(cfg.value("weighting", std::string("efficient")));
  base.hyper = parse_hyper(cfg);
  base.mode = nsi::RieszMode::regression;
  if (cfg.contains("pi") && !cfg["pi"].is_null())
    base.known_pi = cfg["pi"].get<double>();
  if (cfg.contains("phi_basis"))
    base.phi_spec = parse_basis(cfg["phi_basis"], base.phi_spec);
  if (cfg.contains("w_basis")) base.w_spec = parse_basis(cfg["w_basis"], base.w_spec);

  std::vector<std::string> variants = cfg.value(
      "estimators", std::vector<std::string>{"series", "kernel", "tree", "wsi"});
  if (variants.empty()) throw nsi::ConfigError("estimator set is empty");

  // report rows: treatment coefficients
  std::vector<std::string> coef_rows = roles.treatments;
  if (coef_rows.empty())
    throw nsi::ConfigError("estimate requires at least one treatment column");

  ordered_json estimates = ordered_json::object();
  ordered_json j_stats = ordered_json::object();
  std::optional<nsi::ScoreMatrix> first_scores;
  for (const auto& variant : variants) {
    if (variant == "wsi") {
      const nsi::WsiEstimate w = nsi::wsi_estimate(ds, std::string(), base.known_pi);
      ordered_json cells = ordered_json::object();
      for (const auto& t : roles.treatments) {
        const nsi::Vec& z = ds.col(t);
        const double pi = base.known_pi ? *base.known_pi : z.mean();
        const nsi::DiffInMeans dm =
            nsi::index_diff_in_means(w.fit.index_values, z, pi);
        cells[t] = {{"estimate", dm.tau_hat}, {"se", dm.se}};
      }
      estimates["wsi"] = cells;
      continue;
    }
    nsi::NsiOptions opts = base;
    opts.phi_spec.kind = nsi::basis_kind_from_string(variant);
    const nsi::NsiResult res = nsi::run_nsi(ds, opts);
    if (!first_scores) first_scores = res.scores;
    ordered_json cells = ordered_json::object();
    for (const auto& t : roles.treatments) {
      const auto& names = res.estimate.coefficient_names;
      const auto it = std::find(names.begin(), names.end(), t);
      const Eigen::Index idx = it - names.begin();
      cells[t] = {{"estimate", res.estimate.beta(idx)},
                  {"se", res.estimate.se(idx)}};
    }
    estimates[variant] = cells;
    j_stats[variant] = {{"stat", res.estimate.J_stat},
                       {"df", res.estimate.J_df},
                       {"p_value", res.estimate.J_pvalue}};
  }

  ordered_json diag = ordered_json::object();
  {
    ordered_json per_meas = ordered_json::array();
    nsi::NsiOptions dopts = base;
    for (const auto& m : roles.measurements)
      per_meas.push_back(measurement_diagnostics(ds, m, dopts));
    diag["measurements"] = per_meas;
    const nsi::RoleDiagnostics rd = nsi::validate_roles(ds);
    diag["warnings"] = rd.warnings;
  }

  ordered_json report;
  report["schema_version"] = kSchemaVersion;
  report["config"] = resolved_config(cfg, base);
  report["n"] = ds.n();
  report["dropped_rows"] = ds.dropped_rows();
  report["coefficients"] = coef_rows;
  report["variants"] = variants;
  report["estimates"] = estimates;
  report["j_stats"] = j_stats;
  report["diagnostics"] = diag;

  const fs::path out = out_dir(cfg);
  write_file(out / "report.json", report.dump(2) + "\n");
  if (first_scores) write_scores_csv(out / "scores.csv", *first_scores);
  return 0;
}

nsi::DgpSpec parse_dgp(const ordered_json& cfg, std::uint64_t seed) {
  nsi::DgpSpec spec = nsi::DgpSpec::two_study();
  if (cfg.contains("dgp")) {
    const auto& d = cfg["dgp"];
    spec.n = d.value("n", spec.n);
    spec.sigma_u = d.value("sigma_u", spec.sigma_u);
    spec.noise_sd = d.value("noise_sd", spec.noise_sd);
    spec.pi = d.value("pi", spec.pi);
    auto parse_maps = [](const ordered_json& arr) {
      std::vector<nsi::Vec> maps;
      for (const auto& m : arr) {
        nsi::Vec v(static_cast<Eigen::Index>(m.size()));
        for (std::size_t i = 0; i < m.size(); ++i)
          v(static_cast<Eigen::Index>(i)) = m[i].get<double>();
        maps.push_back(v);
      }
      return maps;
    };
    if (d.contains("maps_a")) spec.maps_A = parse_maps(d["maps_a"]);
    if (d.contains("maps_b")) spec.maps_B = parse_maps(d["maps_b"]);
    spec.invert_maps = d.value("invert_maps", spec.invert_maps);
    if (d.contains("noise_scale_a"))
      spec.noise_scale_A = d["noise_scale_a"].get<std::vector<double>>();
    if (d.contains("noise_scale_b"))
      spec.noise_scale_B = d["noise_scale_b"].get<std::vector<double>>();
  }
  spec.seed = seed;
  return spec;
}

int cmd_simulate(const CliOverrides& ov) {
  const ordered_json cfg = load_config(ov);
  const std::uint64_t seed = require_seed(cfg);
  const int reps = cfg.value("reps", 300);
  const nsi::DgpSpec spec = parse_dgp(cfg, seed);
  std::vector<std::string> est_names = cfg.value(
      "estimators", std::vector<std::string>{"pca", "icw", "wsi", "nsi"});
  if (est_names.empty()) throw nsi::ConfigError("estimator set is empty");

  nsi::EstimatorConfig ecfg;
  ecfg.nsi.folds = cfg.value("folds", 5);
  ecfg.nsi.hyper = parse_hyper(cfg);
  ecfg.nsi.weighting =
      nsi::weighting_from_string(cfg.value("weighting", std::string("efficient")));

  std::map<std::string, nsi::McResult> results;
  for (const auto& name : est_names) {
    const nsi::EstimatorKind kind = nsi::estimator_from_string(name);
    results[nsi::to_string(kind)] =
        nsi::run_monte_carlo(spec, kind, reps, seed, ecfg);
  }

  ordered_json table = nsi::summarize_table1(results);
  table["schema_version"] = kSchemaVersion;
  table["config"] = cfg;
  table["n_per_study"] = spec.n;
  table["reps"] = reps;

  std::string csv =
      "estimator,rep,ok,tau_a,se_a,tau_b,se_b,gap,wald_stat,wald_p\n";
  for (const auto& [name, mc] : results) {
    for (const auto& r : mc.reps) {
      csv += name + "," + std::to_string(r.rep) + "," + (r.ok ? "1" : "0") +
             "," + fmt_double(r.tau_a) + "," + fmt_double(r.se_a) + "," +
             fmt_double(r.tau_b) + "," + fmt_double(r.se_b) + "," +
             fmt_double(r.gap) + "," + fmt_double(r.wald_stat) + "," +
             fmt_double(r.wald_p) + "\n";
    }
  }

  const fs::path out = out_dir(cfg);
  write_file(out / "table1.json", table.dump(2) + "\n");
  write_file(out / "replications.csv", csv);
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& coefficient, const std::string& out_path) {
  auto load_report = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) throw nsi::ConfigError("cannot open report '" + p + "'");
    return ordered_json::parse(in);
  };
  const ordered_json a = load_report(path_a);
  const ordered_json b = load_report(path_b);
  for (const auto* rep : {&a, &b})
    if (!rep->contains("estimates"))
      throw nsi::ConfigError("report lacks an \"estimates\" section");

  ordered_json rows = ordered_json::array();
  std::vector<std::string> warnings;
  bool coefficient_seen = false;
  for (const auto& [variant, cells_a] : a["estimates"].items()) {
    if (!b["estimates"].contains(variant)) continue;
    const auto& cells_b = b["estimates"][variant];
    if (!cells_a.contains(coefficient) || !cells_b.contains(coefficient))
      continue;
    coefficient_seen = true;
    const double ta = cells_a[coefficient]["estimate"].get<double>();
    const double sa = cells_a[coefficient]["se"].get<double>();
    const double tb = cells_b[coefficient]["estimate"].get<double>();
    const double sb = cells_b[coefficient]["se"].get<double>();
    const double pooled = sa * sa + sb * sb;
    if (pooled <= 0.0)
      throw nsi::NumericalError("compare: zero variance in both reports");
    const double stat = (ta - tb) * (ta - tb) / pooled;
    rows.push_back({{"variant", variant},
                    {"gap", ta - tb},
                    {"wald_stat", stat},
                    {"df", 1},
                    {"p_value", nsi::chi2_survival(stat, 1)}});
  }
  if (!coefficient_seen) {
    bool variant_shared = false;
    for (const auto& [variant, _] : a["estimates"].items())
      if (b["estimates"].contains(variant)) variant_shared = true;
    if (variant_shared)
      throw nsi::ConfigError("coefficient '" + coefficient +
                             "' not present in both reports");
    warnings.push_back("reports share no estimator variant");
  }

  ordered_json out;
  out["schema_version"] = kSchemaVersion;
  out["coefficient"] = coefficient;
  out["comparisons"] = rows;
  out["warnings"] = warnings;
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    fs::create_directories(out_path);
    write_file(fs::path(out_path) / "comparison.json", text);
  }
  return 0;
}

int cmd_diagnose(const CliOverrides& ov) {
  const ordered_json cfg = load_config(ov);
  ordered_json diag = ordered_json::object();

  if (cfg.contains("completeness_table")) {
    const auto& t = cfg["completeness_table"];
    const Eigen::Index k = static_cast<Eigen::Index>(t.size());
    const Eigen::Index m = k > 0 ? static_cast<Eigen::Index>(t[0].size()) : 0;
    nsi::Mat counts(k, m);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        counts(i, j) = t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                           .get<double>();
    const nsi::CompletenessCheck c = nsi::completeness_rank_check(counts);
    diag["completeness"] = {{"rank", c.rank},
                            {"required_rank", c.required_rank},
                            {"pass", c.pass}};
  }

  if (cfg.contains("input")) {
    const std::uint64_t seed = require_seed(cfg);
    const nsi::ColumnRoles roles = parse_roles(cfg);
    const nsi::Dataset ds = nsi::load_csv(cfg["input"].get<std::string>(), roles);
    nsi::NsiOptions opts;
    opts.seed = seed;
    opts.hyper = parse_hyper(cfg);
    if (cfg.contains("pi") && !cfg["pi"].is_null())
      opts.known_pi = cfg["pi"].get<double>();
    ordered_json per_meas = ordered_json::array();
    for (const auto& m : roles.measurements)
      per_meas.push_back(measurement_diagnostics(ds, m, opts));
    diag["measurements"] = per_meas;
    const nsi::RoleDiagnostics rd = nsi::validate_roles(ds);
    ordered_json summaries = ordered_json::array();
    for (const auto& s : rd.summaries)
      summaries.push_back({{"column", s.column},
                           {"role", s.role},
                           {"mean", s.mean},
                           {"variance", s.variance},
                           {"zero_variance", s.zero_variance}});
    diag["role_summaries"] = summaries;
    diag["warnings"] = rd.warnings;
    diag["n"] = ds.n();
  }

  ordered_json out;
  out["schema_version"] = kSchemaVersion;
  out["config"] = cfg;
  out["diagnostics"] = diag;
  const fs::path dir = out_dir(cfg);
  write_file(dir / "diagnostics.json", out.dump(2) + "\n");
  return 0;
}

int error_exit(const std::string& type, const std::string& message, int code) {
  ordered_json err;
  err["error"] = {{"type", type}, {"message", message}};
  std::cerr << err.dump(2) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent treatment effect estimation from multiple measurements"};
  app.require_subcommand(1);

  CliOverrides ov;
  std::string report_a, report_b, coefficient, compare_out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "config file (JSON)");
    sub->add_option("--seed", ov.seed, "RNG seed (overrides config)");
    sub->add_option("--out", ov.out, "output directory");
    sub->add_option("--folds", ov.folds, "cross-fitting folds");
    sub->add_option("--reps", ov.reps, "Monte Carlo replications");
    sub->add_option("--weighting", ov.weighting, "identity|efficient");
    sub->add_option("--estimators", ov.estimators, "estimator set")
        ->delimiter(',');
  };

  CLI::App* est = app.add_subcommand("estimate", "fit estimators on a CSV dataset");
  add_common(est);
  CLI::App* sim = app.add_subcommand("simulate", "two-study Monte Carlo comparison");
  add_common(sim);
  CLI::App* cmp = app.add_subcommand("compare", "Wald equality test across two reports");
  cmp->add_option("report_a", report_a, "first report.json")->required();
  cmp->add_option("report_b", report_b, "second report.json")->required();
  cmp->add_option("--coefficient", coefficient, "coefficient name")->required();
  cmp->add_option("--out", compare_out, "output directory");
  CLI::App* dia = app.add_subcommand("diagnose", "identification diagnostics");
  add_common(dia);

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return cmd_estimate(ov);
    if (sim->parsed()) return cmd_simulate(ov);
    if (cmp->parsed())
      return cmd_compare(report_a, report_b, coefficient, compare_out);
    if (dia->parsed()) return cmd_diagnose(ov);
  } catch (const nsi::ConfigError& e) {
    return error_exit("config", e.what(), 2);
  } catch (const nsi::ValidationError& e) {
    return error_exit("validation", e.what(), 3);
  } catch (const nsi::Error& e) {
    return error_exit("numerical", e.what(), 1);
  } catch (const std::exception& e) {
    return error_exit("internal", e.what(), 1);
  }
  return 0;
}

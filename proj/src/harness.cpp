#include "twophase/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "twophase/diagnostics.hpp"
#include "twophase/errors.hpp"
#include "twophase/nwts.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace twophase {

namespace {
#ifdef _OPENMP
const int k_startup_threads = omp_get_max_threads();
#else
const int k_startup_threads = 1;
#endif

void apply_parallelism(int requested) {
#ifdef _OPENMP
  omp_set_num_threads(requested > 0 ? requested : k_startup_threads);
#else
  (void)requested;
#endif
}
}  // namespace

const std::vector<GridPoint>& scenario_grid(ScenarioKind kind) {
  static const std::vector<GridPoint> cc{
      {1.0, 0.0}, {0.844, 0.7}, {0.692, 1.4}, {0.541, 2.1}, {0.381, 2.8}};
  static const std::vector<GridPoint> add{{1.0, 0.0},    {0.951, 0.068}, {0.904, 0.131},
                                          {0.861, 0.191}, {0.820, 0.247}, {0.781, 0.3}};
  static const std::vector<GridPoint> mult{{1.0, 0.0},     {1.045, -0.068}, {1.087, -0.131},
                                           {1.127, -0.191}, {1.165, -0.247}, {1.2, -0.3}};
  static const std::vector<GridPoint> none{};
  switch (kind) {
    case ScenarioKind::case_control: return cc;
    case ScenarioKind::surrogate_additive: return add;
    case ScenarioKind::surrogate_multiplicative: return mult;
    case ScenarioKind::nwts: return none;
  }
  return none;
}

const ReportRow* MonteCarloReport::find(double beta0, double delta0, const std::string& estimator,
                                        const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.beta0 == beta0 && r.delta0 == delta0 && r.estimator == estimator &&
        r.metric == metric) {
      return &r;
    }
  }
  return nullptr;
}

double MonteCarloReport::value_of(double beta0, double delta0, const std::string& estimator,
                                  const std::string& metric) const {
  const ReportRow* r = find(beta0, delta0, estimator, metric);
  if (!r) {
    throw InvalidInput("report: missing row " + estimator + "/" + metric + " at (" +
                       std::to_string(beta0) + ", " + std::to_string(delta0) + ")");
  }
  return r->value;
}

bool MonteCarloReport::same_values(const MonteCarloReport& other) const {
  if (rows.size() != other.rows.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = other.rows[i];
    const bool value_equal =
        a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    if (a.scenario != b.scenario || a.beta0 != b.beta0 || a.delta0 != b.delta0 ||
        a.estimator != b.estimator || a.metric != b.metric || !value_equal ||
        a.replicates != b.replicates || a.failures != b.failures) {
      return false;
    }
  }
  return true;
}

namespace {

constexpr double k_nan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t replicate_stream_index(int row, long k) {
  return (static_cast<std::uint64_t>(row) << 40) + static_cast<std::uint64_t>(k);
}

struct PointResult {
  std::vector<std::string> names;
  std::vector<std::vector<double>> estimates;  // per estimator, NaN = failed
  std::vector<long> failures;
  std::vector<std::uint8_t> mp_reject;   // per replicate (diagnostics on)
  std::vector<std::uint8_t> gof_reject;  // first diag_reps replicates
  std::vector<double> llr;               // log Q_n - log P_n per replicate
};

PointResult run_scenario_point(const ExperimentConfig& cfg, int row, const Scenario& sc,
                               const PseudoTrue& star,
                               const std::vector<EstimatorSpec>& specs,
                               const std::vector<std::string>& names, int gof_reps,
                               const MpNullDistribution* null_dist) {
  const long K = cfg.replicates;
  const std::size_t E = specs.size();
  PointResult res;
  res.names = names;
  res.estimates.assign(E, std::vector<double>(K, k_nan));
  res.failures.assign(E, 0);
  if (null_dist) {
    res.mp_reject.assign(K, 0);
    res.llr.assign(K, k_nan);
  }
  if (gof_reps > 0) res.gof_reject.assign(gof_reps, 0);

  std::optional<std::string> hard_error;

#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < K; ++k) {
    try {
      const std::uint64_t kid = replicate_stream_index(row, k);
      RngStream cohort_rng(cfg.seed, stream_domain::cohort, kid);
      RngStream sample_rng(cfg.seed, stream_domain::sample, kid);
      const bool cc = sc.kind == ScenarioKind::case_control;

      Cohort cohort = cc ? gen_casecontrol_cohort(sc, cohort_rng)
                         : gen_surrogate_cohort(sc, cohort_rng);
      std::optional<TwoPhaseSample> sample;
      try {
        sample = cc ? sample_balanced_casecontrol(cohort, sample_rng)
                    : sample_stratified_z(cohort, cfg.intermediate_rate, sample_rng,
                                          cfg.srs_intermediate);
      } catch (const Error&) {
        // design infeasible for this draw; every estimator fails below
      }

      if (sample) {
        const StreamContext ctx{cfg.seed, kid};
        for (std::size_t e = 0; e < E; ++e) {
          try {
            res.estimates[e][k] = run_estimator(specs[e], cohort, *sample, ctx).slope();
          } catch (const Error&) {
          }
        }
      }

      if (null_dist) {
        const double stat = mp_statistic(cohort, star.alpha_star, star.beta_star,
                                         star.sigma2_star);
        RngStream tie_rng(cfg.seed, stream_domain::mp_tie, kid);
        res.mp_reject[k] = mp_test(stat, *null_dist, 0.05, tie_rng).reject ? 1 : 0;
        res.llr[k] = -stat;
      }
      if (k < gof_reps) {
        GofOptions gof;
        gof.bootstrap_reps = cfg.bootstrap_reps;
        gof.binary = cc;
        RngStream gof_rng(cfg.seed, stream_domain::gof, kid);
        res.gof_reject[k] = gof_linearity_test(cohort.x, cohort.y, gof, gof_rng).reject ? 1 : 0;
      }
    } catch (const std::exception& ex) {
#pragma omp critical
      if (!hard_error) hard_error = ex.what();
    }
  }
  if (hard_error) throw Error("run_monte_carlo: " + *hard_error);

  for (std::size_t e = 0; e < E; ++e) {
    for (long k = 0; k < K; ++k) {
      if (std::isnan(res.estimates[e][k])) ++res.failures[e];
    }
  }
  return res;
}

}  // namespace

MonteCarloReport run_monte_carlo(const ExperimentConfig& cfg) {
  if (cfg.scenario == ScenarioKind::nwts) {
    throw InvalidInput("run_monte_carlo: use run_nwts_study for the data example");
  }
  apply_parallelism(cfg.parallelism);
  const auto& grid = scenario_grid(cfg.scenario);
  std::vector<int> rows = cfg.grid_rows;
  if (rows.empty()) {
    for (int r = 0; r < static_cast<int>(grid.size()); ++r) rows.push_back(r);
  }
  const std::vector<std::string> names =
      cfg.estimators.empty() ? default_estimators(cfg.scenario) : cfg.estimators;
  std::vector<EstimatorSpec> specs;
  for (const auto& n : names) {
    specs.push_back(estimator_spec_from_name(n, cfg.scenario, cfg.imputations));
  }

  const int diag_reps = cfg.diag_replicates < 0
                            ? cfg.replicates
                            : std::min<int>(cfg.diag_replicates, cfg.replicates);
  const bool diagnostics = diag_reps > 0;

  MonteCarloReport report;
  for (int row : rows) {
    if (row < 0 || row >= static_cast<int>(grid.size())) {
      throw InvalidInput("run_monte_carlo: grid row out of range");
    }
    const GridPoint pt = grid[row];
    Scenario sc = cfg.scenario == ScenarioKind::case_control
                      ? case_control_scenario(pt.beta0, pt.delta0)
                      : surrogate_scenario(cfg.scenario, pt.beta0, pt.delta0);
    if (cfg.cohort_size > 0) sc.cohort_size = cfg.cohort_size;
    sc.intermediate_rate = cfg.intermediate_rate;

    const PseudoTrue star = pseudo_true_oracle(sc);
    std::optional<MpNullDistribution> null_dist;
    if (diagnostics) {
      null_dist = mp_null_distribution(sc, star.alpha_star, star.beta_star, star.sigma2_star,
                                       cfg.mp_null_replicates,
                                       cfg.seed + 0x51ed2700ULL * (row + 1));
    }

    const PointResult res =
        run_scenario_point(cfg, row, sc, star, specs, names,
                           diagnostics && cfg.gof ? diag_reps : 0,
                           diagnostics ? &*null_dist : nullptr);

    auto add_row = [&](const std::string& estimator, const std::string& metric, double value,
                       long reps, long failures) {
      report.rows.push_back({scenario_name(cfg.scenario), pt.beta0, pt.delta0, estimator, metric,
                             value, reps, failures});
    };

    for (std::size_t e = 0; e < specs.size(); ++e) {
      std::vector<double> ok;
      ok.reserve(cfg.replicates);
      for (double v : res.estimates[e]) {
        if (!std::isnan(v)) ok.push_back(v);
      }
      if (ok.size() < 2) {
        add_row(names[e], "sqrt_mse", k_nan, ok.size(), res.failures[e]);
        continue;
      }
      const Metrics m = compute_metrics(ok, sc.target_beta, res.failures[e]);
      add_row(names[e], "sqrt_mse", m.rmse, m.replicates, m.failures);
      add_row(names[e], "bias", m.bias, m.replicates, m.failures);
      add_row(names[e], "sqrt_var", m.sd, m.replicates, m.failures);
    }

    if (diagnostics) {
      long mp = 0;
      for (auto r : res.mp_reject) mp += r;
      add_row("diagnostic", "mp_power", double(mp) / double(cfg.replicates), cfg.replicates, 0);
      if (!res.gof_reject.empty()) {
        long g = 0;
        for (auto r : res.gof_reject) g += r;
        add_row("diagnostic", "gof_power", double(g) / double(res.gof_reject.size()),
                static_cast<long>(res.gof_reject.size()), 0);
      }
      // |corr(beta_mle - beta_raking, log Q - log P)| over common successes
      const auto mle_it = std::find(names.begin(), names.end(), std::string("mle"));
      const auto rak_it = std::find(names.begin(), names.end(), std::string("raking"));
      if (mle_it != names.end() && rak_it != names.end()) {
        const auto& a = res.estimates[mle_it - names.begin()];
        const auto& b = res.estimates[rak_it - names.begin()];
        std::vector<double> diff, llr;
        for (long k = 0; k < cfg.replicates; ++k) {
          if (!std::isnan(a[k]) && !std::isnan(b[k]) && !std::isnan(res.llr[k])) {
            diff.push_back(a[k] - b[k]);
            llr.push_back(res.llr[k]);
          }
        }
        double corr = k_nan;
        if (diff.size() >= 3) {
          try {
            corr = mle_raking_lr_correlation(diff, llr);
          } catch (const DegenerateVariance&) {
          }
        }
        add_row("diagnostic", "abs_corr", corr, static_cast<long>(diff.size()), 0);
      }
    }
  }
  return report;
}

MonteCarloReport run_nwts_study(const ExperimentConfig& cfg) {
  if (cfg.scenario != ScenarioKind::nwts) {
    throw InvalidInput("run_nwts_study: scenario must be nwts");
  }
  if (cfg.nwts_data.empty()) throw InvalidInput("run_nwts_study: data path required");
  apply_parallelism(cfg.parallelism);
  const NwtsCohort cohort = load_nwts(cfg.nwts_data);
  const Eigen::VectorXd target = nwts_full_cohort_estimate(cohort);
  const Eigen::VectorXd se_sandwich = nwts_full_cohort_se_sandwich(cohort);
  const Eigen::VectorXd se_model = nwts_full_cohort_se_model(cohort);

  const long K = cfg.replicates;
  std::vector<std::optional<Eigen::VectorXd>> mle(K), raking(K), mi(K), mir(K);
  std::vector<long> s2_sizes(K, 0);
  std::vector<int> capped(K, 0);
  std::optional<std::string> hard_error;

#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < K; ++k) {
    try {
      RngStream sample_rng(cfg.seed, stream_domain::sample, static_cast<std::uint64_t>(k));
      const TwoPhaseSample s = sample_nwts_design(cohort, sample_rng);
      s2_sizes[k] = s.s2_size;
      capped[k] = s.capped_strata;
      const NwtsReplicate rep =
          nwts_replicate(cohort, s, cfg.imputations,
                         StreamContext{cfg.seed, static_cast<std::uint64_t>(k)});
      mle[k] = rep.mle;
      raking[k] = rep.raking;
      mi[k] = rep.mi;
      mir[k] = rep.mir;
    } catch (const std::exception& ex) {
#pragma omp critical
      if (!hard_error) hard_error = ex.what();
    }
  }
  if (hard_error) throw Error("run_nwts_study: " + *hard_error);

  MonteCarloReport report;
  auto add_row = [&](const std::string& estimator, const std::string& metric, double value,
                     long reps, long failures) {
    report.rows.push_back({"nwts", 0.0, 0.0, estimator, metric, value, reps, failures});
  };

  const auto& coef = nwts_coefficient_names();
  for (int c = 0; c < 5; ++c) {
    add_row("full_cohort", "estimate:" + coef[c], target[c], 1, 0);
    add_row("full_cohort", "se:" + coef[c], se_sandwich[c], 1, 0);
    add_row("full_cohort", "se_model:" + coef[c], se_model[c], 1, 0);
  }

  const std::vector<std::pair<std::string, const std::vector<std::optional<Eigen::VectorXd>>*>>
      sets{{"mle", &mle}, {"raking", &raking}, {"mi", &mi}, {"mir", &mir}};
  for (const auto& [name, vals] : sets) {
    long failures = 0;
    std::vector<std::vector<double>> per_coef(5);
    for (long k = 0; k < K; ++k) {
      if (!(*vals)[k]) {
        ++failures;
        continue;
      }
      for (int c = 0; c < 5; ++c) per_coef[c].push_back((*(*vals)[k])[c]);
    }
    if (per_coef[0].size() < 2) {
      add_row(name, "sum_of_squares", k_nan, 0, failures);
      continue;
    }
    double ss = 0.0;
    for (int c = 0; c < 5; ++c) {
      const Metrics m = compute_metrics(per_coef[c], target[c], failures);
      add_row(name, "sqrt_mse:" + coef[c], m.rmse, m.replicates, m.failures);
      add_row(name, "bias:" + coef[c], m.bias, m.replicates, m.failures);
      add_row(name, "sqrt_var:" + coef[c], m.sd, m.replicates, m.failures);
      ss += m.rmse * m.rmse;
    }
    add_row(name, "sum_of_squares", ss, static_cast<long>(per_coef[0].size()), failures);
  }

  double mean_s2 = 0.0;
  long capped_total = 0;
  for (long k = 0; k < K; ++k) {
    mean_s2 += double(s2_sizes[k]);
    capped_total += capped[k];
  }
  add_row("design", "mean_s2_size", mean_s2 / double(K), K, 0);
  add_row("design", "capped_strata", double(capped_total) / double(K), K, 0);
  return report;
}

}  // namespace twophase

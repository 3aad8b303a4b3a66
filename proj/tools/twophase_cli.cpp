#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "twophase/harness.hpp"
#include "twophase/report.hpp"

using namespace twophase;

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_config = 2;
constexpr int k_exit_data = 3;
constexpr int k_exit_numerical = 4;

struct CommonArgs {
  std::string config_path;
  std::string scenario;
  std::vector<int> grid_rows;
  int reps = -1;
  int imputations = -1;
  int bootstrap_reps = -1;
  long cohort_size = -1;
  std::int64_t seed = -1;
  int threads = -1;
  int diag_reps = -2;
  int gof = -1;
  std::vector<std::string> estimators;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_scenario) {
  cmd->add_option("--config", a.config_path, "config file (key = value)");
  if (with_scenario) {
    cmd->add_option("--scenario", a.scenario,
                    "case-control | surrogate-additive | surrogate-multiplicative");
    cmd->add_option("--grid-row", a.grid_rows, "grid row indices (default: all rows)");
    cmd->add_option("--cohort-size", a.cohort_size, "override the scenario cohort size");
    cmd->add_option("--estimators", a.estimators)->delimiter(',');
    cmd->add_option("--diag-reps", a.diag_reps,
                    "replicates carrying diagnostics (-1: all, 0: off)");
    cmd->add_option("--gof", a.gof, "run the lack-of-fit test inside diagnostics (0/1)");
  }
  cmd->add_option("--reps", a.reps, "Monte Carlo replicates K");
  cmd->add_option("--imputations", a.imputations, "imputations M");
  cmd->add_option("--bootstrap-reps", a.bootstrap_reps, "wild-bootstrap reps B");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--threads", a.threads, "parallelism degree (0: library default)");
  cmd->add_option("--out", a.out_dir, "output directory");
}

ExperimentConfig build_config(const CommonArgs& a, ScenarioKind fallback_kind) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) cfg = parse_config_file(a.config_path);
  if (!a.scenario.empty()) {
    cfg.scenario = scenario_kind_from_name(a.scenario);
  } else if (a.config_path.empty()) {
    cfg.scenario = fallback_kind;
  }
  if (!a.grid_rows.empty()) cfg.grid_rows = a.grid_rows;
  if (a.reps >= 0) cfg.replicates = a.reps;
  if (a.imputations >= 0) cfg.imputations = a.imputations;
  if (a.bootstrap_reps >= 0) cfg.bootstrap_reps = a.bootstrap_reps;
  if (a.cohort_size >= 0) cfg.cohort_size = a.cohort_size;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.threads >= 0) cfg.parallelism = a.threads;
  if (a.diag_reps >= -1) cfg.diag_replicates = a.diag_reps;
  if (a.gof >= 0) cfg.gof = a.gof != 0;
  if (!a.estimators.empty()) cfg.estimators = a.estimators;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  return cfg;
}

void emit_outputs(const MonteCarloReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_report_csv(report, (fs::path(dir) / "report.csv").string());
  write_report_markdown(report, (fs::path(dir) / "report.md").string());
  write_relative_efficiency_csv(report, (fs::path(dir) / "releff.csv").string());
  std::cout << "wrote " << dir << "/report.{csv,md} and " << dir << "/releff.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"design-based and imputation-based estimators for two-phase designs"};
  app.require_subcommand(1);

  CommonArgs sim_args, nwts_args;
  std::string nwts_data;
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo study over a scenario grid");
  add_common(sim, sim_args, true);

  auto* nwts = app.add_subcommand("nwts", "run the two-phase resampling study on a cohort file");
  add_common(nwts, nwts_args, false);
  nwts->add_option("--data", nwts_data, "cohort CSV path")->required();

  std::string oracle_scenario;
  int oracle_row = -1;
  double oracle_beta0 = 1.0, oracle_delta0 = 0.0;
  auto* oracle = app.add_subcommand("oracle", "print the pseudo-true parameters for a grid point");
  oracle->add_option("--scenario", oracle_scenario)->required();
  oracle->add_option("--grid-row", oracle_row);
  auto* b0_opt = oracle->add_option("--beta0", oracle_beta0);
  oracle->add_option("--delta0", oracle_delta0);

  std::string report_in, report_format = "md";
  auto* report_cmd = app.add_subcommand("report", "re-render a written report");
  report_cmd->add_option("--in", report_in, "report.csv path or its directory")->required();
  report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"csv", "md"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? k_exit_ok : k_exit_config;
  }

  try {
    if (sim->parsed()) {
      ExperimentConfig cfg = build_config(sim_args, ScenarioKind::case_control);
      if (cfg.scenario == ScenarioKind::nwts) {
        throw InvalidInput("simulate: use the nwts subcommand for the data example");
      }
      const MonteCarloReport report = run_monte_carlo(cfg);
      emit_outputs(report, cfg.out_dir.empty() ? "out" : cfg.out_dir);
    } else if (nwts->parsed()) {
      ExperimentConfig cfg = build_config(nwts_args, ScenarioKind::nwts);
      cfg.scenario = ScenarioKind::nwts;
      cfg.nwts_data = nwts_data;
      const MonteCarloReport report = run_nwts_study(cfg);
      emit_outputs(report, cfg.out_dir.empty() ? "out" : cfg.out_dir);
    } else if (oracle->parsed()) {
      const ScenarioKind kind = scenario_kind_from_name(oracle_scenario);
      GridPoint pt;
      if (oracle_row >= 0) {
        const auto& grid = scenario_grid(kind);
        if (oracle_row >= static_cast<int>(grid.size())) {
          throw InvalidInput("oracle: grid row out of range");
        }
        pt = grid[oracle_row];
      } else if (b0_opt->count() > 0) {
        pt = {oracle_beta0, oracle_delta0};
      } else {
        throw InvalidInput("oracle: give --grid-row or --beta0/--delta0");
      }
      const Scenario sc = kind == ScenarioKind::case_control
                              ? case_control_scenario(pt.beta0, pt.delta0)
                              : surrogate_scenario(kind, pt.beta0, pt.delta0);
      const PseudoTrue star = pseudo_true_oracle(sc);
      std::printf("scenario=%s beta0=%.6g delta0=%.6g\n", scenario_name(kind), pt.beta0,
                  pt.delta0);
      std::printf("alpha_star=%.10g beta_star=%.10g sigma2_star=%.10g\n", star.alpha_star,
                  star.beta_star, star.sigma2_star);
    } else if (report_cmd->parsed()) {
      namespace fs = std::filesystem;
      fs::path p(report_in);
      if (fs::is_directory(p)) p /= "report.csv";
      const MonteCarloReport report = read_report_csv(p.string());
      if (report_format == "md") {
        std::cout << render_report_markdown(report);
      } else {
        for (const auto& r : report.rows) {
          std::printf("%s,%.17g,%.17g,%s,%s,%.17g,%ld,%ld\n", r.scenario.c_str(), r.beta0,
                      r.delta0, r.estimator.c_str(), r.metric.c_str(), r.value, r.replicates,
                      r.failures);
        }
      }
    }
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return k_exit_config;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return k_exit_data;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return k_exit_data;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return k_exit_data;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return k_exit_numerical;
  }
  return k_exit_ok;
}

#pragma once

#include <string>
#include <vector>

#include "twophase/config.hpp"
#include "twophase/metrics.hpp"

namespace twophase {

struct GridPoint {
  double beta0 = 1.0;
  double delta0 = 0.0;
};

// the (beta0, delta0) pairs of the simulation studies, calibrated so the
// pseudo-true slope is 1
const std::vector<GridPoint>& scenario_grid(ScenarioKind kind);

struct ReportRow {
  std::string scenario;
  double beta0 = 0.0;
  double delta0 = 0.0;
  std::string estimator;
  std::string metric;
  double value = 0.0;
  long replicates = 0;
  long failures = 0;
};

struct MonteCarloReport {
  std::vector<ReportRow> rows;

  const ReportRow* find(double beta0, double delta0, const std::string& estimator,
                        const std::string& metric) const;
  double value_of(double beta0, double delta0, const std::string& estimator,
                  const std::string& metric) const;  // throws if absent
  bool same_values(const MonteCarloReport& other) const;
};

// Monte Carlo study over the scenario grid; deterministic given the config,
// replicates run in parallel on pre-split streams.
MonteCarloReport run_monte_carlo(const ExperimentConfig& cfg);

// NWTS resampling study (repeated two-phase samples of a fixed cohort)
MonteCarloReport run_nwts_study(const ExperimentConfig& cfg);

inline const std::vector<std::string>& nwts_coefficient_names() {
  static const std::vector<std::string> names{"Hstg", "Stage", "Age", "Diam", "HxS"};
  return names;
}

}  // namespace twophase

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twophase/designs.hpp"
#include "twophase/estimators.hpp"

namespace twophase {

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::case_control;
  std::vector<int> grid_rows;  // empty = whole grid
  int replicates = 500;
  int imputations = 50;
  int bootstrap_reps = 200;     // wild-bootstrap reps inside the lack-of-fit test
  int mp_null_replicates = 10000;
  std::uint64_t seed = 20240613;
  std::vector<std::string> estimators;  // empty = scenario default
  int parallelism = 0;                  // 0 = library default
  int diag_replicates = -1;             // -1 = replicates, 0 = diagnostics off
  bool gof = true;                      // run the lack-of-fit bootstrap inside diagnostics
  long cohort_size = 0;                 // 0 = scenario default
  double intermediate_rate = 0.05;
  bool srs_intermediate = false;
  std::string nwts_data;
  std::string out_dir;
};

ScenarioKind scenario_kind_from_name(const std::string& name);
const char* scenario_name(ScenarioKind kind);

// named estimator -> spec, resolved against the scenario
EstimatorSpec estimator_spec_from_name(const std::string& name, ScenarioKind scenario,
                                       int m_imputations);
std::vector<std::string> default_estimators(ScenarioKind scenario);

// plain-text key = value format, '#' comments, optional [section] headers
// (section names are informational; keys are globally unique)
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace twophase

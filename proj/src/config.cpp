#include "twophase/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "twophase/errors.hpp"

namespace twophase {

ScenarioKind scenario_kind_from_name(const std::string& name) {
  if (name == "case-control" || name == "case_control") return ScenarioKind::case_control;
  if (name == "surrogate-additive" || name == "surrogate_additive")
    return ScenarioKind::surrogate_additive;
  if (name == "surrogate-multiplicative" || name == "surrogate_multiplicative")
    return ScenarioKind::surrogate_multiplicative;
  if (name == "nwts") return ScenarioKind::nwts;
  throw InvalidInput("unknown scenario '" + name + "'");
}

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::case_control: return "case-control";
    case ScenarioKind::surrogate_additive: return "surrogate-additive";
    case ScenarioKind::surrogate_multiplicative: return "surrogate-multiplicative";
    case ScenarioKind::nwts: return "nwts";
  }
  return "?";
}

EstimatorSpec estimator_spec_from_name(const std::string& name, ScenarioKind scenario,
                                       int m) {
  const bool cc = scenario == ScenarioKind::case_control;
  if (name == "mle") {
    return {cc ? EstimatorKind::mle_casecontrol : EstimatorKind::spml_twophase,
            ImputeEngine::parametric_normal, 1};
  }
  if (name == "ipw") return {EstimatorKind::ipw, ImputeEngine::parametric_normal, 1};
  if (name == "rc") return {EstimatorKind::regression_calibration, ImputeEngine::parametric_normal, 1};
  if (name == "raking") return {EstimatorKind::raking_single, ImputeEngine::wild_bootstrap, 1};
  if (name == "mi_p") return {EstimatorKind::mi, ImputeEngine::parametric_normal, m};
  if (name == "mi_b") return {EstimatorKind::mi, ImputeEngine::empirical, m};
  if (name == "mi_boot") return {EstimatorKind::mi, ImputeEngine::wild_bootstrap, m};
  if (name == "mi_bayes") return {EstimatorKind::mi, ImputeEngine::bayesian, m};
  if (name == "mir_boot") return {EstimatorKind::mir, ImputeEngine::wild_bootstrap, m};
  if (name == "mir_bayes") return {EstimatorKind::mir, ImputeEngine::bayesian, m};
  throw InvalidInput("unknown estimator '" + name + "'");
}

std::vector<std::string> default_estimators(ScenarioKind scenario) {
  switch (scenario) {
    case ScenarioKind::case_control: return {"mle", "ipw", "mi_p", "mi_b"};
    case ScenarioKind::surrogate_additive:
    case ScenarioKind::surrogate_multiplicative:
      return {"mle", "raking", "rc", "mi_boot", "mi_bayes", "mir_boot", "mir_bayes"};
    case ScenarioKind::nwts: return {"mle", "raking", "mi", "mir"};
  }
  return {};
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long to_long(const std::string& v, const std::string& key) {
  long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidInput("config: bad integer for " + key + ": '" + v + "'");
  }
  return x;
}

double to_double(const std::string& v, const std::string& key) {
  double x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidInput("config: bad number for " + key + ": '" + v + "'");
  }
  return x;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  long lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section header
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config " + origin + ": expected key = value at line " +
                         std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "scenario") {
      cfg.scenario = scenario_kind_from_name(val);
    } else if (key == "grid_rows") {
      for (const auto& t : split_list(val)) cfg.grid_rows.push_back(int(to_long(t, key)));
    } else if (key == "replicates") {
      cfg.replicates = int(to_long(val, key));
    } else if (key == "imputations") {
      cfg.imputations = int(to_long(val, key));
    } else if (key == "bootstrap_reps") {
      cfg.bootstrap_reps = int(to_long(val, key));
    } else if (key == "mp_null_replicates") {
      cfg.mp_null_replicates = int(to_long(val, key));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_long(val, key));
    } else if (key == "estimators") {
      cfg.estimators = split_list(val);
    } else if (key == "parallelism") {
      cfg.parallelism = int(to_long(val, key));
    } else if (key == "diag_replicates") {
      cfg.diag_replicates = int(to_long(val, key));
    } else if (key == "gof") {
      cfg.gof = to_long(val, key) != 0;
    } else if (key == "cohort_size") {
      cfg.cohort_size = to_long(val, key);
    } else if (key == "rate") {
      cfg.intermediate_rate = to_double(val, key);
    } else if (key == "srs_intermediate") {
      cfg.srs_intermediate = to_long(val, key) != 0;
    } else if (key == "data") {
      cfg.nwts_data = val;
    } else if (key == "dir" || key == "out") {
      cfg.out_dir = val;
    } else {
      throw InvalidInput("config " + origin + ": unknown key '" + key + "'");
    }
  }
  if (cfg.replicates < 2) throw InvalidInput("config: replicates must be >= 2");
  if (cfg.imputations < 1) throw InvalidInput("config: imputations must be >= 1");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace twophase

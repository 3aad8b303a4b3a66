#pragma once

#include <string>

#include "twophase/harness.hpp"

namespace twophase {

// columns: scenario, beta0, delta0, estimator, metric, value, replicates, failures
void write_report_csv(const MonteCarloReport& report, const std::string& path);
MonteCarloReport read_report_csv(const std::string& path);

// markdown table mirroring the study layout: one block per grid point with
// sqrt MSE / bias / sqrt Var rows per estimator plus the diagnostic columns
void write_report_markdown(const MonteCarloReport& report, const std::string& path);

// plot data: per grid point and estimator, MSE relative to the design-based
// reference (ipw for case-control, raking for the surrogate scenarios)
void write_relative_efficiency_csv(const MonteCarloReport& report, const std::string& path);

std::string render_report_markdown(const MonteCarloReport& report);

}  // namespace twophase

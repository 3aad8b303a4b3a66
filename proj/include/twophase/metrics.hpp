#pragma once

#include <vector>

#include "twophase/designs.hpp"

namespace twophase {

struct Metrics {
  double rmse = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  long replicates = 0;
  long failures = 0;
};

// Monte Carlo moments against the target: bias = mean - target, variance with
// divisor K, mse = mean squared deviation from target (so mse = bias^2 + var
// exactly).
Metrics compute_metrics(const std::vector<double>& estimates, double target, long failures = 0);

struct PseudoTrue {
  double alpha_star = 0.0;
  double beta_star = 0.0;
  double sigma2_star = 1.0;       // working-model residual variance (surrogate)
  double indicator_moment = 0.0;  // E[X^2 1{|Z| <= zeta0}] (surrogate)
};

// Limit of the full-cohort working-model fit. Case-control: solves
// E[U(theta)] = 0 under the true spline model by 64-node Gauss-Hermite
// quadrature and Newton. Surrogate: beta* = beta0 + delta0 E[X^2 1{|Z|<=zeta0}]
// with the moment from a 10^7-draw Monte Carlo oracle (cached per scenario kind).
PseudoTrue pseudo_true_oracle(const Scenario& sc);

// the Monte Carlo moment oracle itself, exposed for validation
double surrogate_indicator_moment(ScenarioKind kind, double zeta, long draws = 10000000);

}  // namespace twophase

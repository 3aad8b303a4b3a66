#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "twophase/designs.hpp"
#include "twophase/kernel.hpp"
#include "twophase/rng.hpp"

namespace twophase {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  std::string method;
  int bootstrap_reps = 0;
};

// log-likelihood-ratio statistic sum_i [log p(y_i | data; theta0) - log q(y_i | x_i; theta*)],
// evaluated on complete cohort data (oracle diagnostic). The true-model
// parameters come from cohort.scenario.
double mp_statistic(const Cohort& cohort, double alpha_star, double beta_star,
                    double sigma2_star = 1.0);

struct MpNullDistribution {
  std::vector<double> sorted;  // statistic under data simulated from the theta* model
};

MpNullDistribution mp_null_distribution(const Scenario& sc, double alpha_star, double beta_star,
                                        double sigma2_star, int replicates, std::uint64_t seed);

// Neyman-Pearson test against the empirical null: reject above the 95th
// percentile, randomizing on ties so the size is exact even when the
// statistic is degenerate.
TestResult mp_test(double statistic, const MpNullDistribution& null_dist, double level,
                   RngStream& tie_rng);

struct GofOptions {
  int bootstrap_reps = 200;
  double level = 0.05;
  LooBandwidthOptions bandwidth;
  bool binary = false;  // compare fits on the probability scale
};

// Wild-bootstrap lack-of-fit test of the linear (or linear-logit) mean model
// against a kernel regression, statistic MSE(parametric) - MSE(kernel);
// the bandwidth is re-selected inside every bootstrap replicate.
TestResult gof_linearity_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const GofOptions& opts, RngStream& rng);

// absolute Pearson correlation across Monte Carlo replicates
double mle_raking_lr_correlation(const std::vector<double>& estimator_difference,
                                 const std::vector<double>& log_likelihood_ratio);

}  // namespace twophase

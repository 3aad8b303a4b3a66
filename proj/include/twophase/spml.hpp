#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace twophase {

struct SpmlOptions {
  int max_iter = 500;
  double tol = 1e-8;  // minimum log-likelihood increase
};

struct SpmlFit {
  Eigen::Vector2d theta;  // (intercept, slope)
  double sigma2 = 1.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Semiparametric profile maximum likelihood for the Gaussian outcome model
// y = a + b x + N(0, sigma2) in a stratified two-phase design: the unknown
// within-stratum distribution of x is profiled over the phase-2 support
// points by EM. The log-likelihood is checked to be non-decreasing at every
// iteration.
SpmlFit estimate_spml_gaussian(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                               const std::vector<std::uint8_t>& observed,
                               const std::vector<int>& stratum, const SpmlOptions& opts = {});

}  // namespace twophase

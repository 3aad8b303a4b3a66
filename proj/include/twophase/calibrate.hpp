#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "twophase/glm.hpp"

namespace twophase {

// Auxiliary values H(Y_i, Z_i, A_i; eta), defined on every cohort unit.
struct AuxiliaryMatrix {
  Eigen::MatrixXd H;  // N x q
  bool includes_constant = false;
};

struct RakeOptions {
  bool add_constant = true;  // prepend an all-ones column unless already present
  int max_iter = 50;
  double tol = 1e-8;
  double ridge = 1e-10;
};

struct CalibratedWeights {
  Eigen::VectorXd g;                    // one entry per sampled unit, in cohort order
  Eigen::VectorXd lambda;               // q
  Eigen::VectorXd constraint_residual;  // q
  int iterations = 0;
  bool converged = false;
};

// Solve for g_i = exp(H_i' lambda) > 0 with
//   sum_{i sampled} g_i H_i / pi_i = sum_{i=1..N} H_i
// by damped Newton on lambda (raking distance d(a,b) = a log(a/b) - a + b).
CalibratedWeights rake_weights(const AuxiliaryMatrix& aux, const std::vector<std::uint8_t>& sampled,
                               const Eigen::VectorXd& pi, const RakeOptions& opts = {});

// Horvitz-Thompson estimating equation: fit with weights 1/pi_i over sampled units.
GlmFit ht_solve(Family family, const DesignMatrix& sampled_design, const Eigen::VectorXd& y_sampled,
                const Eigen::VectorXd& pi_sampled, const GlmOptions& glm_opts = {});

struct RakingEstimate {
  GlmFit fit;
  CalibratedWeights weights;
};

// Generalized raking: calibrate, then solve the weighted estimating equation
// with weights g_i/pi_i over sampled units.
RakingEstimate raking_estimator(Family family, const DesignMatrix& cohort_design,
                                const Eigen::VectorXd& cohort_y,
                                const std::vector<std::uint8_t>& sampled, const Eigen::VectorXd& pi,
                                const AuxiliaryMatrix& aux, const RakeOptions& opts = {});

}  // namespace twophase

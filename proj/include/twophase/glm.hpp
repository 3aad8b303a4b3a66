#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "twophase/errors.hpp"

namespace twophase {

enum class Family { linear, logistic };

struct DesignMatrix {
  Eigen::MatrixXd X;  // N x p, first column is the constant when an intercept is requested
  std::vector<std::string> column_names;

  long rows() const { return X.rows(); }
  long cols() const { return X.cols(); }
};

DesignMatrix make_design(std::initializer_list<std::pair<std::string, Eigen::VectorXd>> columns);
DesignMatrix intercept_design(const Eigen::VectorXd& x);  // columns (1, x)

// Fitted estimating-equation model. scores holds rows U_i(theta), bread is
// A = (1/N) sum_i w_i * (-dU_i/dtheta), influence rows are A^{-1} U_i.
struct GlmFit {
  Family family = Family::linear;
  Eigen::VectorXd theta;
  Eigen::MatrixXd scores;     // N x p
  Eigen::MatrixXd bread;      // p x p
  Eigen::MatrixXd influence;  // N x p
  Eigen::VectorXd weights;    // N
  Eigen::VectorXd fitted;     // N (probabilities for logistic)
  Eigen::MatrixXd sandwich;   // p x p
  bool converged = false;
  int iterations = 0;

  long n() const { return scores.rows(); }
  long p() const { return theta.size(); }
};

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-8;
};

GlmFit fit_glm(Family family, const DesignMatrix& design, const Eigen::VectorXd& y,
               const Eigen::VectorXd& weights, const GlmOptions& opts = {});
GlmFit fit_glm(Family family, const DesignMatrix& design, const Eigen::VectorXd& y,
               const GlmOptions& opts = {});

const Eigen::MatrixXd& influence_functions(const GlmFit& fit);

// N^{-2} sum_i w_i^2 Delta_i Delta_i^T
Eigen::MatrixXd sandwich_covariance(const GlmFit& fit);

// classical inverse-information covariance (linear: s^2 (X'WX)^{-1})
Eigen::MatrixXd model_covariance(const GlmFit& fit, const DesignMatrix& design,
                                 const Eigen::VectorXd& y);

double expit(double t);
double log1pexp(double t);

}  // namespace twophase

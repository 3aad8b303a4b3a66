#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "twophase/calibrate.hpp"
#include "twophase/designs.hpp"
#include "twophase/glm.hpp"
#include "twophase/nwts.hpp"
#include "twophase/rng.hpp"

namespace twophase {

enum class ImputeEngine { parametric_normal, empirical, wild_bootstrap, bayesian, bootstrap_binary };

const char* impute_engine_name(ImputeEngine e);

// One imputation draw. x_star keeps observed values on sampled units (the
// completed-data view fitted by the MI estimator); x_resampled carries a fresh
// draw for every cohort unit, which is what the calibration auxiliary needs to
// stay a function of phase-1 data.
struct ImputationDraw {
  Eigen::VectorXd x_star;
  Eigen::VectorXd x_resampled;
  ImputeEngine engine;
  int draw_index = 0;
};

// case-control engines: X | Y=y ~ N(mu + eta y, sigma2) fitted on phase 2
ImputationDraw impute_parametric_normal(const Cohort& cohort, const TwoPhaseSample& s,
                                        RngStream& rng);
// draws from the phase-2 control empirical distribution
ImputationDraw impute_empirical(const Cohort& cohort, const TwoPhaseSample& s, RngStream& rng);

// two-point multiplier with E V = 0, E V^2 = 1
double wild_multiplier(RngStream& rng);

// surrogate engines, imputation regression X ~ (1, Y, Z) on phase 2
ImputationDraw impute_wild_bootstrap(const Cohort& cohort, const TwoPhaseSample& s, RngStream& rng);
ImputationDraw impute_bayesian(const Cohort& cohort, const TwoPhaseSample& s, RngStream& rng);

// NWTS engine: bootstrap the phase-2 units, refit the logistic imputation
// model, draw Bernoulli histology; up to 5 resample retries on separation
ImputationDraw impute_bootstrap_binary(const NwtsCohort& cohort, const TwoPhaseSample& s,
                                       RngStream& rng);

struct MIEstimate {
  Eigen::VectorXd theta_bar;
  Eigen::VectorXd within_var;
  Eigen::VectorXd between_var;
  Eigen::VectorXd total_var;  // within + (1 + 1/M) between
  int m_count = 0;
};

// Rubin's rules over per-imputation estimates and diagonal variances
MIEstimate rubin_combine(
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& estimates);

// Average of per-imputation influence functions of the completed-cohort fits:
// the calibration auxiliary built from M draws. design_of maps an imputed
// covariate vector to the outcome design.
AuxiliaryMatrix mi_calibration_variable(
    const std::vector<Eigen::VectorXd>& covariate_draws, Family family,
    const std::function<DesignMatrix(const Eigen::VectorXd&)>& design_of,
    const Eigen::VectorXd& y);

}  // namespace twophase

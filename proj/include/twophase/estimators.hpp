#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "twophase/calibrate.hpp"
#include "twophase/designs.hpp"
#include "twophase/impute.hpp"
#include "twophase/nwts.hpp"
#include "twophase/spml.hpp"

namespace twophase {

enum class EstimatorKind {
  mle_casecontrol,
  spml_twophase,
  ipw,
  regression_calibration,
  mi,
  raking_single,
  mir
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::ipw;
  ImputeEngine engine = ImputeEngine::parametric_normal;  // mi / mir only
  int m_imputations = 1;

  std::string name() const;
};

struct ThetaEstimate {
  Eigen::VectorXd theta;
  Eigen::VectorXd variance;  // diagonal
  EstimatorSpec spec;
  bool converged = true;
  int iterations = 0;
  double calibration_residual = 0.0;  // max scaled constraint residual, raking kinds

  double slope() const { return theta.size() > 1 ? theta[1] : theta[0]; }
};

// stream bookkeeping for estimators that draw imputations
struct StreamContext {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
};

ThetaEstimate estimate_mle_casecontrol(const Cohort& cohort, const TwoPhaseSample& s);
ThetaEstimate estimate_spml_twophase(const Cohort& cohort, const TwoPhaseSample& s);
ThetaEstimate estimate_ipw(const Cohort& cohort, const TwoPhaseSample& s);
ThetaEstimate estimate_rc(const Cohort& cohort, const TwoPhaseSample& s);
ThetaEstimate estimate_mi(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                          int m_imputations, const StreamContext& ctx);
ThetaEstimate estimate_raking_single(const Cohort& cohort, const TwoPhaseSample& s);
ThetaEstimate estimate_mir(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                           int m_imputations, const StreamContext& ctx);

ThetaEstimate run_estimator(const EstimatorSpec& spec, const Cohort& cohort,
                            const TwoPhaseSample& s, const StreamContext& ctx);

// imputation draw for one m of estimate_mir / estimate_mi (shared stream layout)
ImputationDraw simulation_draw(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                               const StreamContext& ctx, std::uint64_t domain, int m);

// ---- NWTS pipelines (5 reported coefficients: Hstg, Stage, Age, Diam, H*S) ----

struct NwtsReplicate {
  std::optional<Eigen::VectorXd> mle, raking, mi, mir;  // absent on failure
  int mi_failures = 0;
};

// full-cohort fit of the outcome model with central histology; reported
// coefficient order (Hstg, Stage, Age, Diam, H*S)
Eigen::VectorXd nwts_full_cohort_estimate(const NwtsCohort& cohort);
Eigen::VectorXd nwts_full_cohort_se_sandwich(const NwtsCohort& cohort);
Eigen::VectorXd nwts_full_cohort_se_model(const NwtsCohort& cohort);

NwtsReplicate nwts_replicate(const NwtsCohort& cohort, const TwoPhaseSample& s, int m_imputations,
                             const StreamContext& ctx);

}  // namespace twophase

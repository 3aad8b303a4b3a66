#pragma once

#include <Eigen/Dense>
#include <string>

#include "twophase/designs.hpp"
#include "twophase/glm.hpp"

namespace twophase {

// column mapping for the delimited input file; defaults match the public file
struct NwtsColumnMap {
  std::string relapse = "relaps";
  std::string instit = "instit";    // local-laboratory histology, unfavorable = 1
  std::string histol = "histol";    // central-laboratory histology, unfavorable = 1
  std::string stage = "stage";      // raw stage 1..4
  std::string age = "age";          // years
  std::string diameter = "tumdiam"; // cm
};

struct NwtsCohort {
  Eigen::VectorXi relapse, instit, histol, stage_raw;
  Eigen::VectorXd age, diameter;

  long size() const { return relapse.size(); }
  Eigen::VectorXd stage_dichotomous() const;  // III/IV = 1, I/II = 0
};

NwtsCohort load_nwts(const std::string& path, const NwtsColumnMap& map = {});
std::string serialize_nwts(const NwtsCohort& cohort, const NwtsColumnMap& map = {});

// Phase 2: everyone relapsed or local-unfavorable; within each raw stage,
// an SRS of non-relapsed favorable-local units matching that stage's relapse count.
TwoPhaseSample sample_nwts_design(const NwtsCohort& cohort, RngStream& rng);

// outcome model: relapse ~ age + diameter + histology + stage2 + histology:stage2,
// with an arbitrary histology column (observed, imputed, or predicted probability)
DesignMatrix nwts_outcome_design(const NwtsCohort& cohort, const Eigen::VectorXd& histology);

// imputation model for central histology: age + diameter + full
// relapse x stage2 x local-histology factorial
DesignMatrix nwts_imputation_design(const NwtsCohort& cohort);

// small synthetic cohort with the same schema, for exercising the pipeline in tests
NwtsCohort synthetic_nwts_cohort(long n, RngStream& rng);

}  // namespace twophase

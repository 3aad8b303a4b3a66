#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "twophase/rng.hpp"

namespace twophase {

enum class ScenarioKind { case_control, surrogate_additive, surrogate_multiplicative, nwts };

// F_Z^{-1}(0.95) for Z = X + eps ~ N(0,2), i.e. sqrt(2) * qnorm(0.95)
inline constexpr double k_additive_zeta = 2.3261743073533;
// F_Z^{-1}(0.95) for Z = eta X, eta ~ Gamma(4, rate 4)
inline constexpr double k_multiplicative_zeta = 1.8;

struct Scenario {
  ScenarioKind kind = ScenarioKind::case_control;
  double alpha0 = 0.0;
  double beta0 = 1.0;
  double delta0 = 0.0;
  double knot = 0.0;  // spline knot xi (case-control) or stratum cut zeta0 (surrogate)
  long cohort_size = 0;
  double intermediate_rate = 0.05;  // surrogate phase-2 rate inside |z| <= zeta0
  double target_beta = 1.0;
};

Scenario case_control_scenario(double beta0, double delta0, long cohort_size = 10000);
Scenario surrogate_scenario(ScenarioKind kind, double beta0, double delta0,
                            long cohort_size = 5000);

struct Cohort {
  Scenario scenario;
  Eigen::VectorXd y;
  Eigen::VectorXd x;  // ground truth, masked by the sampling indicator downstream
  Eigen::VectorXd z;  // surrogate; empty for case-control
  std::vector<int> stratum;
  int n_strata = 0;

  long size() const { return y.size(); }
};

struct TwoPhaseSample {
  std::vector<std::uint8_t> R;  // sampling indicators
  Eigen::VectorXd pi;           // known inclusion probabilities, all units
  long s2_size = 0;
  int capped_strata = 0;  // strata where the control draw was capped at the stratum size
};

// Y ~ Bernoulli(expit(alpha0 + beta0 x + delta0 (x - xi) 1{x > xi})), X ~ N(0,1)
Cohort gen_casecontrol_cohort(const Scenario& sc, RngStream& rng);

// all cases sampled; simple random sample of (case count) controls
TwoPhaseSample sample_balanced_casecontrol(const Cohort& cohort, RngStream& rng);

// X ~ N(0,1); additive: Z = X + N(0,1); multiplicative: Z = eta X, eta ~ Gamma(4,4);
// Y = alpha0 + beta0 X + delta0 X 1{|Z| <= zeta0} + N(0,1)
Cohort gen_surrogate_cohort(const Scenario& sc, RngStream& rng);

// pi = 1 on |Z| > zeta0, Bernoulli(rate) in the intermediate stratum;
// fixed-count SRS of the intermediate stratum when srs_fixed_count is set
TwoPhaseSample sample_stratified_z(const Cohort& cohort, double rate, RngStream& rng,
                                   bool srs_fixed_count = false);

}  // namespace twophase

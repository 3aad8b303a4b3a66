#include "twophase/designs.hpp"

#include <algorithm>
#include <cmath>

#include "twophase/errors.hpp"
#include "twophase/glm.hpp"

namespace twophase {

Scenario case_control_scenario(double beta0, double delta0, long cohort_size) {
  Scenario sc;
  sc.kind = ScenarioKind::case_control;
  sc.alpha0 = -5.0;
  sc.beta0 = beta0;
  sc.delta0 = delta0;
  sc.knot = 1.8;
  sc.cohort_size = cohort_size;
  return sc;
}

Scenario surrogate_scenario(ScenarioKind kind, double beta0, double delta0, long cohort_size) {
  if (kind != ScenarioKind::surrogate_additive && kind != ScenarioKind::surrogate_multiplicative) {
    throw InvalidInput("surrogate_scenario: kind must be a surrogate scenario");
  }
  Scenario sc;
  sc.kind = kind;
  sc.alpha0 = 0.0;
  sc.beta0 = beta0;
  sc.delta0 = delta0;
  sc.knot = kind == ScenarioKind::surrogate_additive ? k_additive_zeta : k_multiplicative_zeta;
  sc.cohort_size = cohort_size;
  return sc;
}

Cohort gen_casecontrol_cohort(const Scenario& sc, RngStream& rng) {
  if (sc.kind != ScenarioKind::case_control) throw InvalidInput("expected case_control scenario");
  const long N = sc.cohort_size;
  Cohort c;
  c.scenario = sc;
  c.y.resize(N);
  c.x.resize(N);
  c.stratum.resize(N);
  for (long i = 0; i < N; ++i) {
    const double x = rng.normal();
    const double spline = x > sc.knot ? (x - sc.knot) : 0.0;
    const double eta = sc.alpha0 + sc.beta0 * x + sc.delta0 * spline;
    const double y = rng.bernoulli(expit(eta)) ? 1.0 : 0.0;
    c.x[i] = x;
    c.y[i] = y;
    c.stratum[i] = y > 0.5 ? 1 : 0;
  }
  c.n_strata = 2;
  return c;
}

TwoPhaseSample sample_balanced_casecontrol(const Cohort& cohort, RngStream& rng) {
  const long N = cohort.size();
  std::vector<long> controls;
  controls.reserve(N);
  long n_cases = 0;
  for (long i = 0; i < N; ++i) {
    if (cohort.y[i] > 0.5) {
      ++n_cases;
    } else {
      controls.push_back(i);
    }
  }
  if (n_cases < 1) throw InsufficientControls("sample_balanced_casecontrol: no cases");
  if (static_cast<long>(controls.size()) < n_cases) {
    throw InsufficientControls("sample_balanced_casecontrol: fewer controls than cases");
  }

  TwoPhaseSample s;
  s.R.assign(N, 0);
  s.pi.resize(N);
  const double pi_control = double(n_cases) / double(controls.size());
  for (long i = 0; i < N; ++i) {
    if (cohort.y[i] > 0.5) {
      s.R[i] = 1;
      s.pi[i] = 1.0;
    } else {
      s.pi[i] = pi_control;
    }
  }
  // partial Fisher-Yates draw of n_cases controls without replacement
  for (long d = 0; d < n_cases; ++d) {
    const std::size_t j = d + rng.uniform_index(controls.size() - d);
    std::swap(controls[d], controls[j]);
    s.R[controls[d]] = 1;
  }
  s.s2_size = 2 * n_cases;
  return s;
}

Cohort gen_surrogate_cohort(const Scenario& sc, RngStream& rng) {
  const bool additive = sc.kind == ScenarioKind::surrogate_additive;
  if (!additive && sc.kind != ScenarioKind::surrogate_multiplicative) {
    throw InvalidInput("expected surrogate scenario");
  }
  const long N = sc.cohort_size;
  Cohort c;
  c.scenario = sc;
  c.y.resize(N);
  c.x.resize(N);
  c.z.resize(N);
  c.stratum.resize(N);
  for (long i = 0; i < N; ++i) {
    const double x = rng.normal();
    const double z = additive ? x + rng.normal() : rng.gamma(4.0, 4.0) * x;
    const bool intermediate = std::abs(z) <= sc.knot;
    const double mean = sc.alpha0 + sc.beta0 * x + (intermediate ? sc.delta0 * x : 0.0);
    c.x[i] = x;
    c.z[i] = z;
    c.y[i] = mean + rng.normal();
    c.stratum[i] = intermediate ? 0 : 1;
  }
  c.n_strata = 2;
  return c;
}

TwoPhaseSample sample_stratified_z(const Cohort& cohort, double rate, RngStream& rng,
                                   bool srs_fixed_count) {
  if (!(rate > 0.0 && rate <= 1.0)) throw InvalidInput("sample_stratified_z: rate in (0,1]");
  if (cohort.z.size() != cohort.size()) {
    throw InvalidInput("sample_stratified_z: cohort has no surrogate values");
  }
  const long N = cohort.size();
  const double zeta = cohort.scenario.knot;
  TwoPhaseSample s;
  s.R.assign(N, 0);
  s.pi.resize(N);
  if (!srs_fixed_count) {
    for (long i = 0; i < N; ++i) {
      if (std::abs(cohort.z[i]) > zeta) {
        s.R[i] = 1;
        s.pi[i] = 1.0;
      } else {
        s.R[i] = rng.bernoulli(rate) ? 1 : 0;
        s.pi[i] = rate;
      }
    }
  } else {
    std::vector<long> inter;
    inter.reserve(N);
    for (long i = 0; i < N; ++i) {
      if (std::abs(cohort.z[i]) > zeta) {
        s.R[i] = 1;
        s.pi[i] = 1.0;
      } else {
        inter.push_back(i);
      }
    }
    const long m = std::lround(rate * double(inter.size()));
    const double pi_int = inter.empty() ? 1.0 : double(m) / double(inter.size());
    for (long i : inter) s.pi[i] = pi_int;
    for (long d = 0; d < m; ++d) {
      const std::size_t j = d + rng.uniform_index(inter.size() - d);
      std::swap(inter[d], inter[j]);
      s.R[inter[d]] = 1;
    }
  }
  s.s2_size = 0;
  for (auto r : s.R) s.s2_size += r;
  return s;
}

}  // namespace twophase

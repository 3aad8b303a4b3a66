#include "twophase/estimators.hpp"

#include <cmath>

#include "twophase/errors.hpp"

namespace twophase {

std::string EstimatorSpec::name() const {
  auto engine_tag = [&]() -> std::string {
    switch (engine) {
      case ImputeEngine::parametric_normal: return "_p";
      case ImputeEngine::empirical: return "_b";
      case ImputeEngine::wild_bootstrap: return "_boot";
      case ImputeEngine::bayesian: return "_bayes";
      case ImputeEngine::bootstrap_binary: return "";
    }
    return "";
  };
  switch (kind) {
    case EstimatorKind::mle_casecontrol: return "mle";
    case EstimatorKind::spml_twophase: return "mle";
    case EstimatorKind::ipw: return "ipw";
    case EstimatorKind::regression_calibration: return "rc";
    case EstimatorKind::mi: return "mi" + engine_tag();
    case EstimatorKind::raking_single: return "raking";
    case EstimatorKind::mir: return "mir" + engine_tag();
  }
  return "?";
}

namespace {

struct SampledView {
  DesignMatrix design;      // (1, x) over sampled units
  Eigen::VectorXd y;
  Eigen::VectorXd pi;
  std::vector<long> idx;
};

SampledView sampled_view(const Cohort& cohort, const TwoPhaseSample& s) {
  if (static_cast<long>(s.R.size()) != cohort.size() || s.pi.size() != cohort.size()) {
    throw DimensionMismatch("estimator: sample/cohort length mismatch");
  }
  SampledView v;
  for (long i = 0; i < cohort.size(); ++i) {
    if (s.R[i]) v.idx.push_back(i);
  }
  const long n = static_cast<long>(v.idx.size());
  v.design.X.resize(n, 2);
  v.design.column_names = {"(const)", "x"};
  v.y.resize(n);
  v.pi.resize(n);
  for (long k = 0; k < n; ++k) {
    const long i = v.idx[k];
    v.design.X(k, 0) = 1.0;
    v.design.X(k, 1) = cohort.x[i];
    v.y[k] = cohort.y[i];
    v.pi[k] = s.pi[i];
  }
  return v;
}

Family outcome_family(const Cohort& cohort) {
  return cohort.scenario.kind == ScenarioKind::case_control ? Family::logistic : Family::linear;
}

ThetaEstimate from_fit(const GlmFit& fit, EstimatorSpec spec) {
  ThetaEstimate e;
  e.theta = fit.theta;
  e.variance = fit.sandwich.diagonal();
  e.spec = spec;
  e.converged = fit.converged;
  e.iterations = fit.iterations;
  return e;
}

}  // namespace

ThetaEstimate estimate_mle_casecontrol(const Cohort& cohort, const TwoPhaseSample& s) {
  if (cohort.scenario.kind != ScenarioKind::case_control) {
    throw InvalidInput("estimate_mle_casecontrol: wrong scenario kind");
  }
  const SampledView v = sampled_view(cohort, s);
  return from_fit(fit_glm(Family::logistic, v.design, v.y),
                  {EstimatorKind::mle_casecontrol, ImputeEngine::parametric_normal, 1});
}

ThetaEstimate estimate_spml_twophase(const Cohort& cohort, const TwoPhaseSample& s) {
  if (outcome_family(cohort) != Family::linear) {
    throw InvalidInput("estimate_spml_twophase: Gaussian outcome model required");
  }
  SpmlFit fit = estimate_spml_gaussian(cohort.y, cohort.x, s.R, cohort.stratum);
  ThetaEstimate e;
  e.theta = fit.theta;
  e.variance = Eigen::VectorXd::Zero(2);
  e.spec = {EstimatorKind::spml_twophase, ImputeEngine::parametric_normal, 1};
  e.converged = fit.converged;
  e.iterations = fit.iterations;
  return e;
}

ThetaEstimate estimate_ipw(const Cohort& cohort, const TwoPhaseSample& s) {
  const SampledView v = sampled_view(cohort, s);
  return from_fit(ht_solve(outcome_family(cohort), v.design, v.y, v.pi),
                  {EstimatorKind::ipw, ImputeEngine::parametric_normal, 1});
}

ThetaEstimate estimate_rc(const Cohort& cohort, const TwoPhaseSample& s) {
  if (cohort.z.size() != cohort.size()) {
    throw InvalidInput("estimate_rc: scenario has no surrogate");
  }
  const SampledView v = sampled_view(cohort, s);
  const long n2 = static_cast<long>(v.idx.size());
  DesignMatrix zd;
  zd.X.resize(n2, 2);
  zd.column_names = {"(const)", "z"};
  Eigen::VectorXd xs(n2);
  for (long k = 0; k < n2; ++k) {
    zd.X(k, 0) = 1.0;
    zd.X(k, 1) = cohort.z[v.idx[k]];
    xs[k] = cohort.x[v.idx[k]];
  }
  const GlmFit cal = fit_glm(Family::linear, zd, xs);

  Eigen::VectorXd blended(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    blended[i] = s.R[i] ? cohort.x[i] : cal.theta[0] + cal.theta[1] * cohort.z[i];
  }
  return from_fit(fit_glm(outcome_family(cohort), intercept_design(blended), cohort.y),
                  {EstimatorKind::regression_calibration, ImputeEngine::parametric_normal, 1});
}

ImputationDraw simulation_draw(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                               const StreamContext& ctx, std::uint64_t domain, int m) {
  RngStream rng(ctx.seed, domain, ctx.replicate, static_cast<std::uint64_t>(m));
  switch (engine) {
    case ImputeEngine::parametric_normal: return impute_parametric_normal(cohort, s, rng);
    case ImputeEngine::empirical: return impute_empirical(cohort, s, rng);
    case ImputeEngine::wild_bootstrap: return impute_wild_bootstrap(cohort, s, rng);
    case ImputeEngine::bayesian: return impute_bayesian(cohort, s, rng);
    case ImputeEngine::bootstrap_binary:
      throw InvalidInput("simulation_draw: bootstrap_binary is the NWTS engine");
  }
  throw InvalidInput("simulation_draw: unknown engine");
}

ThetaEstimate estimate_mi(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                          int m_imputations, const StreamContext& ctx) {
  if (m_imputations < 1) throw InvalidInput("estimate_mi: M >= 1");
  const Family family = outcome_family(cohort);
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> fits;
  fits.reserve(m_imputations);
  for (int m = 0; m < m_imputations; ++m) {
    const ImputationDraw d = simulation_draw(cohort, s, engine, ctx, stream_domain::impute_mi, m);
    const GlmFit fit = fit_glm(family, intercept_design(d.x_star), cohort.y);
    fits.emplace_back(fit.theta, fit.sandwich.diagonal());
  }
  const MIEstimate mi = rubin_combine(fits);
  ThetaEstimate e;
  e.theta = mi.theta_bar;
  e.variance = mi.total_var;
  e.spec = {EstimatorKind::mi, engine, m_imputations};
  return e;
}

ThetaEstimate estimate_raking_single(const Cohort& cohort, const TwoPhaseSample& s) {
  if (cohort.z.size() != cohort.size()) {
    throw InvalidInput("estimate_raking_single: scenario has no surrogate");
  }
  const Family family = outcome_family(cohort);
  const SampledView v = sampled_view(cohort, s);
  const long n2 = static_cast<long>(v.idx.size());

  // single imputation model x ~ (1, y, z) on phase 2
  DesignMatrix wd;
  wd.X.resize(n2, 3);
  wd.column_names = {"(const)", "y", "z"};
  Eigen::VectorXd xs(n2);
  for (long k = 0; k < n2; ++k) {
    const long i = v.idx[k];
    wd.X(k, 0) = 1.0;
    wd.X(k, 1) = cohort.y[i];
    wd.X(k, 2) = cohort.z[i];
    xs[k] = cohort.x[i];
  }
  const GlmFit imp = fit_glm(Family::linear, wd, xs);

  Eigen::VectorXd xhat(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    xhat[i] = imp.theta[0] + imp.theta[1] * cohort.y[i] + imp.theta[2] * cohort.z[i];
  }
  const GlmFit cohort_fit = fit_glm(family, intercept_design(xhat), cohort.y);

  AuxiliaryMatrix aux;
  aux.H = cohort_fit.influence;
  const RakingEstimate rk =
      raking_estimator(family, intercept_design(cohort.x), cohort.y, s.R, s.pi, aux);
  ThetaEstimate e = from_fit(rk.fit, {EstimatorKind::raking_single, ImputeEngine::wild_bootstrap, 1});
  e.calibration_residual = rk.weights.constraint_residual.cwiseAbs().maxCoeff();
  e.iterations = rk.weights.iterations;
  return e;
}

ThetaEstimate estimate_mir(const Cohort& cohort, const TwoPhaseSample& s, ImputeEngine engine,
                           int m_imputations, const StreamContext& ctx) {
  if (m_imputations < 1) throw InvalidInput("estimate_mir: M >= 1");
  const Family family = outcome_family(cohort);

  std::vector<Eigen::VectorXd> draws;
  draws.reserve(m_imputations);
  for (int m = 0; m < m_imputations; ++m) {
    draws.push_back(
        simulation_draw(cohort, s, engine, ctx, stream_domain::impute_mir, m).x_resampled);
  }
  const AuxiliaryMatrix aux = mi_calibration_variable(
      draws, family, [](const Eigen::VectorXd& xv) { return intercept_design(xv); }, cohort.y);

  const RakingEstimate rk =
      raking_estimator(family, intercept_design(cohort.x), cohort.y, s.R, s.pi, aux);
  ThetaEstimate e = from_fit(rk.fit, {EstimatorKind::mir, engine, m_imputations});
  e.calibration_residual = rk.weights.constraint_residual.cwiseAbs().maxCoeff();
  e.iterations = rk.weights.iterations;
  return e;
}

ThetaEstimate run_estimator(const EstimatorSpec& spec, const Cohort& cohort,
                            const TwoPhaseSample& s, const StreamContext& ctx) {
  switch (spec.kind) {
    case EstimatorKind::mle_casecontrol: return estimate_mle_casecontrol(cohort, s);
    case EstimatorKind::spml_twophase: return estimate_spml_twophase(cohort, s);
    case EstimatorKind::ipw: return estimate_ipw(cohort, s);
    case EstimatorKind::regression_calibration: return estimate_rc(cohort, s);
    case EstimatorKind::mi: return estimate_mi(cohort, s, spec.engine, spec.m_imputations, ctx);
    case EstimatorKind::raking_single: return estimate_raking_single(cohort, s);
    case EstimatorKind::mir: return estimate_mir(cohort, s, spec.engine, spec.m_imputations, ctx);
  }
  throw InvalidInput("run_estimator: unknown estimator kind");
}

// ---- NWTS ----

namespace {

// report order (Hstg, Stage, Age, Diam, H*S) from design order
// (const, age, diameter, histology, stage, histology:stage)
Eigen::VectorXd report_order(const Eigen::VectorXd& theta) {
  Eigen::VectorXd out(5);
  out << theta[3], theta[4], theta[1], theta[2], theta[5];
  return out;
}

Eigen::VectorXd report_order_se(const Eigen::MatrixXd& cov) {
  Eigen::VectorXd d = cov.diagonal().cwiseSqrt();
  Eigen::VectorXd out(5);
  out << d[3], d[4], d[1], d[2], d[5];
  return out;
}

}  // namespace

Eigen::VectorXd nwts_full_cohort_estimate(const NwtsCohort& cohort) {
  const GlmFit fit = fit_glm(Family::logistic,
                             nwts_outcome_design(cohort, cohort.histol.cast<double>()),
                             cohort.relapse.cast<double>());
  return report_order(fit.theta);
}

Eigen::VectorXd nwts_full_cohort_se_sandwich(const NwtsCohort& cohort) {
  const GlmFit fit = fit_glm(Family::logistic,
                             nwts_outcome_design(cohort, cohort.histol.cast<double>()),
                             cohort.relapse.cast<double>());
  return report_order_se(fit.sandwich);
}

Eigen::VectorXd nwts_full_cohort_se_model(const NwtsCohort& cohort) {
  const DesignMatrix d = nwts_outcome_design(cohort, cohort.histol.cast<double>());
  const Eigen::VectorXd y = cohort.relapse.cast<double>();
  const GlmFit fit = fit_glm(Family::logistic, d, y);
  return report_order_se(model_covariance(fit, d, y));
}

NwtsReplicate nwts_replicate(const NwtsCohort& cohort, const TwoPhaseSample& s, int m_imputations,
                             const StreamContext& ctx) {
  const long N = cohort.size();
  NwtsReplicate out;
  const Eigen::VectorXd relapse = cohort.relapse.cast<double>();

  std::vector<long> idx;
  for (long i = 0; i < N; ++i) {
    if (s.R[i]) idx.push_back(i);
  }
  const long n2 = static_cast<long>(idx.size());

  auto subset_fit = [&](const Eigen::VectorXd& histology,
                        const Eigen::VectorXd* weights) -> GlmFit {
    const DesignMatrix full = nwts_outcome_design(cohort, histology);
    DesignMatrix sub;
    sub.column_names = full.column_names;
    sub.X.resize(n2, full.cols());
    Eigen::VectorXd y(n2), w(n2);
    for (long k = 0; k < n2; ++k) {
      sub.X.row(k) = full.X.row(idx[k]);
      y[k] = relapse[idx[k]];
      w[k] = weights ? (*weights)[k] : 1.0;
    }
    return fit_glm(Family::logistic, sub, y, w);
  };

  const Eigen::VectorXd hist_obs = cohort.histol.cast<double>();

  try {
    out.mle = report_order(subset_fit(hist_obs, nullptr).theta);
  } catch (const Error&) {
  }

  // single-imputation raking: logistic imputation model on phase 2, predicted
  // probabilities for everyone, influence functions of the full-cohort fit
  try {
    const DesignMatrix imp_full = nwts_imputation_design(cohort);
    DesignMatrix imp_sub;
    imp_sub.column_names = imp_full.column_names;
    imp_sub.X.resize(n2, imp_full.cols());
    Eigen::VectorXd h2(n2);
    for (long k = 0; k < n2; ++k) {
      imp_sub.X.row(k) = imp_full.X.row(idx[k]);
      h2[k] = hist_obs[idx[k]];
    }
    const GlmFit imp_fit = fit_glm(Family::logistic, imp_sub, h2);
    Eigen::VectorXd h_pred(N);
    for (long i = 0; i < N; ++i) h_pred[i] = expit(imp_full.X.row(i).dot(imp_fit.theta));

    const GlmFit cohort_fit =
        fit_glm(Family::logistic, nwts_outcome_design(cohort, h_pred), relapse);
    AuxiliaryMatrix aux;
    aux.H = cohort_fit.influence;
    const CalibratedWeights cw = rake_weights(aux, s.R, s.pi);
    Eigen::VectorXd w(n2);
    for (long k = 0; k < n2; ++k) w[k] = cw.g[k] / s.pi[idx[k]];
    out.raking = report_order(subset_fit(hist_obs, &w).theta);
  } catch (const Error&) {
  }

  // MI and MIR share the bootstrap-binary engine on separate streams
  try {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> fits;
    for (int m = 0; m < m_imputations; ++m) {
      RngStream rng(ctx.seed, stream_domain::impute_mi, ctx.replicate,
                    static_cast<std::uint64_t>(m));
      const ImputationDraw d = impute_bootstrap_binary(cohort, s, rng);
      const GlmFit fit =
          fit_glm(Family::logistic, nwts_outcome_design(cohort, d.x_star), relapse);
      fits.emplace_back(fit.theta, fit.sandwich.diagonal());
    }
    const MIEstimate mi = rubin_combine(fits);
    out.mi = report_order(mi.theta_bar);
  } catch (const Error&) {
    ++out.mi_failures;
  }

  try {
    std::vector<Eigen::VectorXd> draws;
    for (int m = 0; m < m_imputations; ++m) {
      RngStream rng(ctx.seed, stream_domain::impute_mir, ctx.replicate,
                    static_cast<std::uint64_t>(m));
      draws.push_back(impute_bootstrap_binary(cohort, s, rng).x_resampled);
    }
    const AuxiliaryMatrix aux = mi_calibration_variable(
        draws, Family::logistic,
        [&](const Eigen::VectorXd& h) { return nwts_outcome_design(cohort, h); }, relapse);
    const CalibratedWeights cw = rake_weights(aux, s.R, s.pi);
    Eigen::VectorXd w(n2);
    for (long k = 0; k < n2; ++k) w[k] = cw.g[k] / s.pi[idx[k]];
    out.mir = report_order(subset_fit(hist_obs, &w).theta);
  } catch (const Error&) {
    ++out.mi_failures;
  }

  return out;
}

}  // namespace twophase

#include "twophase/impute.hpp"

#include <cmath>

#include "twophase/errors.hpp"

namespace twophase {

const char* impute_engine_name(ImputeEngine e) {
  switch (e) {
    case ImputeEngine::parametric_normal: return "parametric_normal";
    case ImputeEngine::empirical: return "empirical";
    case ImputeEngine::wild_bootstrap: return "wild_bootstrap";
    case ImputeEngine::bayesian: return "bayesian";
    case ImputeEngine::bootstrap_binary: return "bootstrap_binary";
  }
  return "?";
}

namespace {

void check_lengths(const Cohort& cohort, const TwoPhaseSample& s) {
  if (static_cast<long>(s.R.size()) != cohort.size() || s.pi.size() != cohort.size()) {
    throw DimensionMismatch("impute: sample/cohort length mismatch");
  }
}

ImputationDraw assemble(const Cohort& cohort, const TwoPhaseSample& s, Eigen::VectorXd draws,
                        ImputeEngine engine) {
  ImputationDraw d;
  d.engine = engine;
  d.x_resampled = std::move(draws);
  d.x_star = d.x_resampled;
  for (long i = 0; i < cohort.size(); ++i) {
    if (s.R[i]) d.x_star[i] = cohort.x[i];
  }
  return d;
}

}  // namespace

ImputationDraw impute_parametric_normal(const Cohort& cohort, const TwoPhaseSample& s,
                                        RngStream& rng) {
  check_lengths(cohort, s);
  double sum0 = 0, sum1 = 0;
  long n0 = 0, n1 = 0;
  for (long i = 0; i < cohort.size(); ++i) {
    if (!s.R[i]) continue;
    if (cohort.y[i] > 0.5) {
      sum1 += cohort.x[i];
      ++n1;
    } else {
      sum0 += cohort.x[i];
      ++n0;
    }
  }
  if (n0 == 0 || n1 == 0) {
    throw DegenerateVariance("impute_parametric_normal: a response class is absent in phase 2");
  }
  const double mu = sum0 / n0;
  const double mean1 = sum1 / n1;
  double ss = 0.0;
  for (long i = 0; i < cohort.size(); ++i) {
    if (!s.R[i]) continue;
    const double center = cohort.y[i] > 0.5 ? mean1 : mu;
    ss += (cohort.x[i] - center) * (cohort.x[i] - center);
  }
  if (n0 + n1 < 3 || ss <= 0.0) {
    throw DegenerateVariance("impute_parametric_normal: zero pooled variance");
  }
  const double sigma = std::sqrt(ss / double(n0 + n1 - 2));
  const double eta = mean1 - mu;

  Eigen::VectorXd draws(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    draws[i] = mu + eta * cohort.y[i] + sigma * rng.normal();
  }
  return assemble(cohort, s, std::move(draws), ImputeEngine::parametric_normal);
}

ImputationDraw impute_empirical(const Cohort& cohort, const TwoPhaseSample& s, RngStream& rng) {
  check_lengths(cohort, s);
  std::vector<double> source;
  for (long i = 0; i < cohort.size(); ++i) {
    if (s.R[i] && cohort.y[i] < 0.5) source.push_back(cohort.x[i]);
  }
  if (source.empty()) throw EmptySource("impute_empirical: no phase-2 controls");
  Eigen::VectorXd draws(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    draws[i] = source[rng.uniform_index(source.size())];
  }
  return assemble(cohort, s, std::move(draws), ImputeEngine::empirical);
}

double wild_multiplier(RngStream& rng) {
  static const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  static const double p_pos = (std::sqrt(5.0) - 1.0) / (2.0 * std::sqrt(5.0));
  return rng.bernoulli(p_pos) ? golden : 1.0 - golden;
}

namespace {

struct Phase2Regression {
  Eigen::MatrixXd W;      // n2 x 3, columns (1, Y, Z)
  Eigen::VectorXd x;      // observed X
  Eigen::VectorXd coef;   // (a, b, c)
  Eigen::VectorXd fitted;
  Eigen::VectorXd resid;
  std::vector<long> idx;
};

Phase2Regression phase2_regression(const Cohort& cohort, const TwoPhaseSample& s) {
  check_lengths(cohort, s);
  if (cohort.z.size() != cohort.size()) {
    throw InvalidInput("impute: scenario has no surrogate for the (1,Y,Z) regression");
  }
  Phase2Regression r;
  for (long i = 0; i < cohort.size(); ++i) {
    if (s.R[i]) r.idx.push_back(i);
  }
  const long n2 = static_cast<long>(r.idx.size());
  if (n2 < 4) throw InvalidInput("impute: phase-2 sample too small");
  r.W.resize(n2, 3);
  r.x.resize(n2);
  for (long k = 0; k < n2; ++k) {
    const long i = r.idx[k];
    r.W(k, 0) = 1.0;
    r.W(k, 1) = cohort.y[i];
    r.W(k, 2) = cohort.z[i];
    r.x[k] = cohort.x[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(r.W);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw SingularDesign("impute: singular (1,Y,Z) regression");
  r.coef = qr.solve(r.x);
  r.fitted = r.W * r.coef;
  r.resid = r.x - r.fitted;
  return r;
}

}  // namespace

ImputationDraw impute_wild_bootstrap(const Cohort& cohort, const TwoPhaseSample& s,
                                     RngStream& rng) {
  Phase2Regression reg = phase2_regression(cohort, s);
  const long n2 = reg.x.size();

  Eigen::VectorXd x_perturbed(n2);
  for (long k = 0; k < n2; ++k) x_perturbed[k] = reg.fitted[k] + wild_multiplier(rng) * reg.resid[k];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(reg.W);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw SingularDesign("impute_wild_bootstrap: singular refit");
  const Eigen::VectorXd coef = qr.solve(x_perturbed);
  const Eigen::VectorXd resid = x_perturbed - reg.W * coef;
  const double tau2 = resid.squaredNorm() / double(n2);
  if (!(tau2 > 0.0)) {
    // zero residuals: the refit collapses to the fitted means
    Eigen::VectorXd draws(cohort.size());
    for (long i = 0; i < cohort.size(); ++i) {
      draws[i] = coef[0] + coef[1] * cohort.y[i] + coef[2] * cohort.z[i];
    }
    return assemble(cohort, s, std::move(draws), ImputeEngine::wild_bootstrap);
  }
  const double tau = std::sqrt(tau2);
  Eigen::VectorXd draws(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    draws[i] = coef[0] + coef[1] * cohort.y[i] + coef[2] * cohort.z[i] + tau * rng.normal();
  }
  return assemble(cohort, s, std::move(draws), ImputeEngine::wild_bootstrap);
}

ImputationDraw impute_bayesian(const Cohort& cohort, const TwoPhaseSample& s, RngStream& rng) {
  Phase2Regression reg = phase2_regression(cohort, s);
  const long n2 = reg.x.size();
  if (n2 <= 3) throw InvalidInput("impute_bayesian: needs |S2| > 3");

  const double a_n = double(n2 - 3);
  const double b_n = reg.resid.squaredNorm();
  if (!(b_n > 0.0)) throw DegenerateVariance("impute_bayesian: zero residual sum of squares");
  const double tau2 = rng.inv_gamma(a_n / 2.0, b_n / 2.0);

  const Eigen::MatrixXd xtx_inv =
      (reg.W.transpose() * reg.W).llt().solve(Eigen::MatrixXd::Identity(3, 3));
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(xtx_inv).matrixL();
  Eigen::Vector3d unit;
  for (int j = 0; j < 3; ++j) unit[j] = rng.normal();
  const Eigen::VectorXd coef = reg.coef + std::sqrt(tau2) * (chol * unit);

  const double tau = std::sqrt(tau2);
  Eigen::VectorXd draws(cohort.size());
  for (long i = 0; i < cohort.size(); ++i) {
    draws[i] = coef[0] + coef[1] * cohort.y[i] + coef[2] * cohort.z[i] + tau * rng.normal();
  }
  return assemble(cohort, s, std::move(draws), ImputeEngine::bayesian);
}

ImputationDraw impute_bootstrap_binary(const NwtsCohort& cohort, const TwoPhaseSample& s,
                                       RngStream& rng) {
  const long N = cohort.size();
  if (static_cast<long>(s.R.size()) != N) {
    throw DimensionMismatch("impute_bootstrap_binary: sample length mismatch");
  }
  std::vector<long> idx;
  for (long i = 0; i < N; ++i) {
    if (s.R[i]) idx.push_back(i);
  }
  const long n2 = static_cast<long>(idx.size());
  const DesignMatrix full = nwts_imputation_design(cohort);
  const long p = full.cols();
  if (n2 < p) throw InvalidInput("impute_bootstrap_binary: phase-2 sample smaller than model");

  GlmFit fit;
  bool fitted = false;
  for (int attempt = 0; attempt < 6 && !fitted; ++attempt) {
    DesignMatrix boot;
    boot.column_names = full.column_names;
    boot.X.resize(n2, p);
    Eigen::VectorXd yb(n2);
    for (long k = 0; k < n2; ++k) {
      const long i = idx[rng.uniform_index(idx.size())];
      boot.X.row(k) = full.X.row(i);
      yb[k] = cohort.histol[i];
    }
    try {
      fit = fit_glm(Family::logistic, boot, yb);
      fitted = true;
    } catch (const NonConvergence&) {
    } catch (const SingularDesign&) {
    }
  }
  if (!fitted) {
    throw NonConvergence("impute_bootstrap_binary: refit failed after 5 resample retries");
  }

  ImputationDraw d;
  d.engine = ImputeEngine::bootstrap_binary;
  d.x_resampled.resize(N);
  d.x_star.resize(N);
  for (long i = 0; i < N; ++i) {
    const double prob = expit(full.X.row(i).dot(fit.theta));
    d.x_resampled[i] = rng.bernoulli(prob) ? 1.0 : 0.0;
    d.x_star[i] = s.R[i] ? double(cohort.histol[i]) : d.x_resampled[i];
  }
  return d;
}

MIEstimate rubin_combine(
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& estimates) {
  if (estimates.empty()) throw InvalidInput("rubin_combine: needs M >= 1");
  const long p = estimates.front().first.size();
  const int M = static_cast<int>(estimates.size());
  for (const auto& [th, var] : estimates) {
    if (th.size() != p || var.size() != p) {
      throw DimensionMismatch("rubin_combine: estimate dimension mismatch");
    }
  }
  MIEstimate out;
  out.m_count = M;
  out.theta_bar = Eigen::VectorXd::Zero(p);
  out.within_var = Eigen::VectorXd::Zero(p);
  for (const auto& [th, var] : estimates) {
    out.theta_bar += th;
    out.within_var += var;
  }
  out.theta_bar /= double(M);
  out.within_var /= double(M);
  out.between_var = Eigen::VectorXd::Zero(p);
  if (M > 1) {
    for (const auto& [th, var] : estimates) {
      out.between_var += (th - out.theta_bar).cwiseAbs2();
    }
    out.between_var /= double(M - 1);
  }
  out.total_var = out.within_var + (1.0 + 1.0 / double(M)) * out.between_var;
  return out;
}

AuxiliaryMatrix mi_calibration_variable(
    const std::vector<Eigen::VectorXd>& covariate_draws, Family family,
    const std::function<DesignMatrix(const Eigen::VectorXd&)>& design_of,
    const Eigen::VectorXd& y) {
  if (covariate_draws.empty()) throw InvalidInput("mi_calibration_variable: needs M >= 1");
  AuxiliaryMatrix aux;
  bool first = true;
  for (const auto& draw : covariate_draws) {
    if (draw.size() != y.size()) {
      throw DimensionMismatch("mi_calibration_variable: draw must cover the full cohort");
    }
    const GlmFit fit = fit_glm(family, design_of(draw), y);
    if (first) {
      aux.H = fit.influence;
      first = false;
    } else {
      aux.H += fit.influence;
    }
  }
  aux.H /= double(covariate_draws.size());
  aux.includes_constant = false;
  return aux;
}

}  // namespace twophase

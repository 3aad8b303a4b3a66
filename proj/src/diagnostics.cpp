#include "twophase/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "twophase/errors.hpp"
#include "twophase/glm.hpp"
#include "twophase/impute.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace twophase {

namespace {

constexpr double k_log_2pi = 1.8378770664093454835606594728112;

double casecontrol_llr(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Scenario& sc,
                       double a_star, double b_star) {
  double s = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    const double spline = x[i] > sc.knot ? (x[i] - sc.knot) : 0.0;
    const double eta0 = sc.alpha0 + sc.beta0 * x[i] + sc.delta0 * spline;
    const double etas = a_star + b_star * x[i];
    s += y[i] * (eta0 - etas) - log1pexp(eta0) + log1pexp(etas);
  }
  return s;
}

double gaussian_llr(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                    const Scenario& sc, double a_star, double b_star, double s2_star) {
  double s = 0.0;
  const double log_s2s = std::log(s2_star);
  const double var_excess = (1.0 - s2_star) / s2_star;
  for (long i = 0; i < y.size(); ++i) {
    const double inter = std::abs(z[i]) <= sc.knot ? sc.delta0 * x[i] : 0.0;
    const double r0 = y[i] - (sc.alpha0 + sc.beta0 * x[i] + inter);
    const double rs = y[i] - (a_star + b_star * x[i]);
    // factored so identical models give exactly zero term by term
    s += 0.5 * (log_s2s + (rs - r0) * (rs + r0) + rs * rs * var_excess);
  }
  return s;
}

}  // namespace

double mp_statistic(const Cohort& cohort, double alpha_star, double beta_star,
                    double sigma2_star) {
  if (cohort.scenario.kind == ScenarioKind::case_control) {
    return casecontrol_llr(cohort.y, cohort.x, cohort.scenario, alpha_star, beta_star);
  }
  return gaussian_llr(cohort.y, cohort.x, cohort.z, cohort.scenario, alpha_star, beta_star,
                      sigma2_star);
}

MpNullDistribution mp_null_distribution(const Scenario& sc, double alpha_star, double beta_star,
                                        double sigma2_star, int replicates, std::uint64_t seed) {
  if (replicates < 100) throw InvalidInput("mp_null_distribution: needs >= 100 replicates");
  MpNullDistribution out;
  out.sorted.resize(replicates);
  const bool cc = sc.kind == ScenarioKind::case_control;
  const double sig_star = std::sqrt(sigma2_star);

#pragma omp parallel for schedule(dynamic, 8)
  for (int r = 0; r < replicates; ++r) {
    RngStream rng(seed, stream_domain::mp_null, static_cast<std::uint64_t>(r));
    const long N = sc.cohort_size;
    Eigen::VectorXd y(N), x(N), z;
    if (cc) {
      for (long i = 0; i < N; ++i) {
        x[i] = rng.normal();
        y[i] = rng.bernoulli(expit(alpha_star + beta_star * x[i])) ? 1.0 : 0.0;
      }
    } else {
      const bool additive = sc.kind == ScenarioKind::surrogate_additive;
      z.resize(N);
      for (long i = 0; i < N; ++i) {
        x[i] = rng.normal();
        z[i] = additive ? x[i] + rng.normal() : rng.gamma(4.0, 4.0) * x[i];
        y[i] = alpha_star + beta_star * x[i] + sig_star * rng.normal();
      }
    }
    out.sorted[r] = cc ? casecontrol_llr(y, x, sc, alpha_star, beta_star)
                       : gaussian_llr(y, x, z, sc, alpha_star, beta_star, sigma2_star);
  }
  std::sort(out.sorted.begin(), out.sorted.end());
  return out;
}

TestResult mp_test(double statistic, const MpNullDistribution& null_dist, double level,
                   RngStream& tie_rng) {
  const auto& s = null_dist.sorted;
  const long B = static_cast<long>(s.size());
  if (B < 20) throw InvalidInput("mp_test: null distribution too small");
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("mp_test: level in (0,1)");

  long idx = static_cast<long>(std::ceil((1.0 - level) * double(B))) - 1;
  idx = std::clamp<long>(idx, 0, B - 1);
  const double c = s[idx];
  const long n_gt = static_cast<long>(s.end() - std::upper_bound(s.begin(), s.end(), c));
  const long n_eq =
      static_cast<long>(std::upper_bound(s.begin(), s.end(), c) - std::lower_bound(s.begin(), s.end(), c));
  double gamma = 0.0;
  if (n_eq > 0) gamma = std::clamp((level * double(B) - double(n_gt)) / double(n_eq), 0.0, 1.0);

  TestResult out;
  out.method = "mp";
  out.statistic = statistic;
  out.bootstrap_reps = static_cast<int>(B);
  const long above = static_cast<long>(s.end() - std::upper_bound(s.begin(), s.end(), statistic));
  out.p_value = double(above + 1) / double(B + 1);
  if (statistic > c) {
    out.reject = true;
  } else if (statistic == c) {
    out.reject = tie_rng.bernoulli(gamma);
  }
  return out;
}

namespace {

// least-squares fit of the working mean curve; linear closed form or
// Gauss-Newton on the logistic curve for the binary adaptation
Eigen::Vector2d gof_parametric_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, bool binary,
                                   const Eigen::Vector2d& init) {
  const long n = x.size();
  if (!binary) {
    double sx = x.sum(), sxx = x.squaredNorm(), sy = y.sum(), sxy = x.dot(y);
    const double det = double(n) * sxx - sx * sx;
    if (std::abs(det) <= 1e-12 * double(n) * std::max(1.0, sxx)) {
      throw SingularDesign("gof: degenerate x");
    }
    Eigen::Vector2d th;
    th[1] = (double(n) * sxy - sx * sy) / det;
    th[0] = (sy - th[1] * sx) / double(n);
    return th;
  }
  Eigen::Vector2d th = init;
  auto sse_at = [&](const Eigen::Vector2d& t) {
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      const double r = y[i] - expit(t[0] + t[1] * x[i]);
      s += r * r;
    }
    return s;
  };
  double sse = sse_at(th);
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (long i = 0; i < n; ++i) {
      const double p = expit(th[0] + th[1] * x[i]);
      const double v = p * (1.0 - p);
      const Eigen::Vector2d ji(v, v * x[i]);
      jtj += ji * ji.transpose();
      jtr += ji * (y[i] - p);
    }
    jtj.diagonal().array() += 1e-12 * jtj.trace();
    const Eigen::Vector2d step = jtj.ldlt().solve(jtr);
    double t = 1.0;
    Eigen::Vector2d cand;
    double sse_new = sse;
    while (t > 1e-8) {
      cand = th + t * step;
      sse_new = sse_at(cand);
      if (sse_new <= sse) break;
      t *= 0.5;
    }
    if (sse_new > sse || sse - sse_new <= 1e-12 * (1.0 + sse)) {
      if (sse_new <= sse) th = cand;
      break;
    }
    th = cand;
    sse = sse_new;
  }
  return th;
}

}  // namespace

TestResult gof_linearity_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const GofOptions& opts, RngStream& rng) {
  const long n = x.size();
  if (n < 10 || y.size() != n) throw InvalidInput("gof_linearity_test: need n >= 10");
  if (opts.bootstrap_reps < 50) throw InvalidInput("gof_linearity_test: need B >= 50");

  Eigen::Vector2d init(0.0, 0.0);
  if (opts.binary) {
    init = fit_glm(Family::logistic, intercept_design(x), y).theta;
  }
  const Eigen::Vector2d theta = gof_parametric_fit(x, y, opts.binary, init);
  auto mean_at = [&](const Eigen::Vector2d& t, double xi) {
    const double eta = t[0] + t[1] * xi;
    return opts.binary ? expit(eta) : eta;
  };

  Eigen::VectorXd fitted(n), resid(n);
  for (long i = 0; i < n; ++i) {
    fitted[i] = mean_at(theta, x[i]);
    resid[i] = y[i] - fitted[i];
  }
  const double mse_par = resid.squaredNorm() / double(n);

  const bool binned = n > 600;
  NadarayaWatsonEvaluator eval(x, binned);
  const double h_ref = silverman_bandwidth(x);

  const double h = loo_bandwidth(eval, h_ref, y, opts.bandwidth);
  const Eigen::VectorXd m_hat = eval.fitted(y, h);
  const double mse_ker = (y - m_hat).squaredNorm() / double(n);
  const double ell = mse_par - mse_ker;

  long exceed = 0;
  Eigen::VectorXd ystar(n);
  for (int b = 0; b < opts.bootstrap_reps; ++b) {
    for (long i = 0; i < n; ++i) ystar[i] = fitted[i] + wild_multiplier(rng) * resid[i];
    const Eigen::Vector2d theta_b = gof_parametric_fit(x, ystar, opts.binary, theta);
    double mse_par_b = 0.0;
    for (long i = 0; i < n; ++i) {
      const double r = ystar[i] - mean_at(theta_b, x[i]);
      mse_par_b += r * r;
    }
    mse_par_b /= double(n);
    const double hb = loo_bandwidth(eval, h_ref, ystar, opts.bandwidth);
    const Eigen::VectorXd mb = eval.fitted(ystar, hb);
    const double mse_ker_b = (ystar - mb).squaredNorm() / double(n);
    if (mse_par_b - mse_ker_b > ell) ++exceed;
  }

  TestResult out;
  out.method = "gof_linearity";
  out.statistic = ell;
  out.bootstrap_reps = opts.bootstrap_reps;
  out.p_value = double(1 + exceed) / double(opts.bootstrap_reps + 1);
  out.reject = out.p_value <= opts.level;
  return out;
}

double mle_raking_lr_correlation(const std::vector<double>& estimator_difference,
                                 const std::vector<double>& log_likelihood_ratio) {
  const std::size_t k = estimator_difference.size();
  if (k != log_likelihood_ratio.size()) throw DimensionMismatch("correlation: length mismatch");
  if (k < 3) throw InvalidInput("correlation: needs at least 3 replicates");
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < k; ++i) {
    ma += estimator_difference[i];
    mb += log_likelihood_ratio[i];
  }
  ma /= double(k);
  mb /= double(k);
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double da = estimator_difference[i] - ma;
    const double db = log_likelihood_ratio[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw DegenerateVariance("correlation: a series is constant");
  return std::abs(sab / std::sqrt(saa * sbb));
}

}  // namespace twophase

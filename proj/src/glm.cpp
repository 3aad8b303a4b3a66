#include "twophase/glm.hpp"

#include <cmath>

namespace twophase {

double expit(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double log1pexp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

DesignMatrix make_design(std::initializer_list<std::pair<std::string, Eigen::VectorXd>> columns) {
  DesignMatrix d;
  d.X.resize(columns.begin()->second.size(), static_cast<long>(columns.size()));
  long j = 0;
  for (const auto& [name, col] : columns) {
    if (col.size() != d.X.rows()) throw DimensionMismatch("make_design: column length mismatch");
    d.X.col(j++) = col;
    d.column_names.push_back(name);
  }
  return d;
}

DesignMatrix intercept_design(const Eigen::VectorXd& x) {
  DesignMatrix d;
  d.X.resize(x.size(), 2);
  d.X.col(0).setOnes();
  d.X.col(1) = x;
  d.column_names = {"(const)", "x"};
  return d;
}

namespace {

void validate_inputs(Family family, const DesignMatrix& design, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w) {
  const long n = design.rows();
  const long p = design.cols();
  if (p < 1 || n < p) throw InvalidInput("fit_glm: need N >= p >= 1");
  if (y.size() != n || w.size() != n) throw DimensionMismatch("fit_glm: length mismatch");
  if (!design.X.allFinite()) throw InvalidInput("fit_glm: non-finite design entry");
  if (!y.allFinite()) throw InvalidInput("fit_glm: non-finite response");
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw InvalidInput("fit_glm: weights must be finite and nonnegative");
  }
  if ((w.array() > 0.0).count() < p) {
    throw InvalidInput("fit_glm: fewer positive-weight units than parameters");
  }
  if (family == Family::logistic) {
    for (long i = 0; i < n; ++i) {
      if (y[i] != 0.0 && y[i] != 1.0) throw InvalidInput("fit_glm: logistic response must be 0/1");
    }
  }
}

// shared epilogue: scores, bread, influence, sandwich
void finish_fit(GlmFit& fit, const DesignMatrix& design, const Eigen::VectorXd& y) {
  const long n = design.rows();
  Eigen::VectorXd resid(n);
  Eigen::VectorXd curvature(n);  // -dU/deta per unit
  if (fit.family == Family::linear) {
    resid = y - design.X * fit.theta;
    fit.fitted = y - resid;
    curvature.setOnes();
  } else {
    resid = y - fit.fitted;
    curvature = fit.fitted.array() * (1.0 - fit.fitted.array());
  }
  fit.scores = design.X.array().colwise() * resid.array();
  const Eigen::ArrayXd wc = fit.weights.array() * curvature.array();
  fit.bread = (design.X.transpose() * (design.X.array().colwise() * wc).matrix()) / double(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(fit.bread);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * ldlt.vectorD().maxCoeff()) {
    throw SingularDesign("fit_glm: bread matrix not positive definite");
  }
  fit.influence = ldlt.solve(fit.scores.transpose()).transpose();
  const Eigen::MatrixXd wi = fit.influence.array().colwise() * fit.weights.array();
  fit.sandwich = (wi.transpose() * wi) / (double(n) * double(n));
}

GlmFit fit_linear(const DesignMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const long p = design.cols();
  GlmFit fit;
  fit.family = Family::linear;
  fit.weights = w;
  const Eigen::ArrayXd sw = w.array().sqrt();
  const Eigen::MatrixXd Xw = design.X.array().colwise() * sw;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularDesign("fit_glm: rank-deficient weighted design");
  fit.theta = qr.solve((y.array() * sw).matrix());
  fit.converged = true;
  fit.iterations = 1;
  finish_fit(fit, design, y);
  return fit;
}

GlmFit fit_logistic(const DesignMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    const GlmOptions& opts) {
  const long n = design.rows();
  const long p = design.cols();
  GlmFit fit;
  fit.family = Family::logistic;
  fit.weights = w;
  fit.theta = Eigen::VectorXd::Zero(p);

  const double wsum = w.sum();
  const double gtol = opts.tol * (1.0 + wsum);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd prob(n), grad(p), step(p);
  auto loglik_at = [&](const Eigen::VectorXd& e) {
    double ll = 0.0;
    for (long i = 0; i < n; ++i) ll += w[i] * (y[i] * e[i] - log1pexp(e[i]));
    return ll;
  };

  double ll = loglik_at(eta);
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    for (long i = 0; i < n; ++i) prob[i] = expit(eta[i]);
    grad = design.X.transpose() * (w.array() * (y - prob).array()).matrix();
    if (grad.cwiseAbs().maxCoeff() <= gtol) {
      // a gradient this small with a saturated linear predictor means the
      // maximizer ran off to infinity (separated data), not a finite MLE
      double max_eta = 0.0;
      for (long i = 0; i < n; ++i) {
        if (w[i] > 0.0) max_eta = std::max(max_eta, std::abs(eta[i]));
      }
      if (max_eta > 30.0) throw NonConvergence("fit_glm: separated logistic data");
      converged = true;
      break;
    }
    const Eigen::ArrayXd wv = w.array() * prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd hess = design.X.transpose() * (design.X.array().colwise() * wv).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      // near-separated; tiny ridge keeps the step usable, cap decides convergence
      hess.diagonal().array() += 1e-12 * hess.trace() + 1e-300;
      ldlt.compute(hess);
      if (ldlt.info() != Eigen::Success) throw SingularDesign("fit_glm: singular information");
    }
    step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd eta_new;
    double ll_new;
    for (;;) {
      eta_new = eta + t * (design.X * step);
      ll_new = loglik_at(eta_new);
      if (ll_new >= ll || t < 1e-10) break;
      t *= 0.5;
    }
    eta = eta_new;
    fit.theta += t * step;
    ll = ll_new;
  }
  fit.iterations = it;
  fit.converged = converged;
  if (!converged) throw NonConvergence("fit_glm: logistic solver hit iteration cap");

  fit.fitted.resize(n);
  for (long i = 0; i < n; ++i) fit.fitted[i] = expit(eta[i]);
  finish_fit(fit, design, y);
  return fit;
}

}  // namespace

GlmFit fit_glm(Family family, const DesignMatrix& design, const Eigen::VectorXd& y,
               const Eigen::VectorXd& weights, const GlmOptions& opts) {
  validate_inputs(family, design, y, weights);
  if (family == Family::linear) return fit_linear(design, y, weights);
  return fit_logistic(design, y, weights, opts);
}

GlmFit fit_glm(Family family, const DesignMatrix& design, const Eigen::VectorXd& y,
               const GlmOptions& opts) {
  return fit_glm(family, design, y, Eigen::VectorXd::Ones(design.rows()), opts);
}

const Eigen::MatrixXd& influence_functions(const GlmFit& fit) {
  if (!fit.converged) throw InvalidInput("influence_functions: fit did not converge");
  return fit.influence;
}

Eigen::MatrixXd sandwich_covariance(const GlmFit& fit) {
  if (!fit.converged) throw InvalidInput("sandwich_covariance: fit did not converge");
  return fit.sandwich;
}

Eigen::MatrixXd model_covariance(const GlmFit& fit, const DesignMatrix& design,
                                 const Eigen::VectorXd& y) {
  const long n = design.rows();
  const long p = design.cols();
  Eigen::ArrayXd wv = fit.weights.array();
  double scale = 1.0;
  if (fit.family == Family::linear) {
    const Eigen::VectorXd resid = y - fit.fitted;
    const double wsum = fit.weights.sum();
    scale = (fit.weights.array() * resid.array().square()).sum() / (wsum * (1.0 - double(p) / double(n)));
  } else {
    wv *= fit.fitted.array() * (1.0 - fit.fitted.array());
  }
  const Eigen::MatrixXd info = design.X.transpose() * (design.X.array().colwise() * wv).matrix();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularDesign("model_covariance: singular information");
  }
  return scale * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
}

}  // namespace twophase

#include "twophase/calibrate.hpp"

#include <cmath>

namespace twophase {

namespace {

Eigen::MatrixXd with_constant(const AuxiliaryMatrix& aux, bool add_constant) {
  if (aux.includes_constant || !add_constant) return aux.H;
  Eigen::MatrixXd H(aux.H.rows(), aux.H.cols() + 1);
  H.col(0).setOnes();
  H.rightCols(aux.H.cols()) = aux.H;
  return H;
}

}  // namespace

CalibratedWeights rake_weights(const AuxiliaryMatrix& aux, const std::vector<std::uint8_t>& sampled,
                               const Eigen::VectorXd& pi, const RakeOptions& opts) {
  const long N = aux.H.rows();
  if (static_cast<long>(sampled.size()) != N || pi.size() != N) {
    throw DimensionMismatch("rake_weights: indicator/probability length mismatch");
  }
  if (!aux.H.allFinite()) throw InvalidInput("rake_weights: non-finite auxiliary entry");

  const Eigen::MatrixXd H = with_constant(aux, opts.add_constant);
  const long q = H.cols();

  std::vector<long> idx;
  idx.reserve(N);
  for (long i = 0; i < N; ++i) {
    if (sampled[i]) {
      if (!(pi[i] > 0.0 && pi[i] <= 1.0)) {
        throw InvalidInput("rake_weights: sampled unit needs pi in (0,1]");
      }
      idx.push_back(i);
    }
  }
  const long n = static_cast<long>(idx.size());
  if (n < 1) throw InvalidInput("rake_weights: empty sample");

  Eigen::MatrixXd Hs(n, q);
  Eigen::VectorXd invpi(n);
  for (long r = 0; r < n; ++r) {
    Hs.row(r) = H.row(idx[r]);
    invpi[r] = 1.0 / pi[idx[r]];
  }
  const Eigen::VectorXd target = H.colwise().sum().transpose();
  const Eigen::VectorXd res_scale = (target.cwiseAbs().array() + 1.0).matrix();

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd g(n), residual(q);

  auto eval_residual = [&](const Eigen::VectorXd& lam, Eigen::VectorXd& g_out,
                           Eigen::VectorXd& res_out) -> bool {
    Eigen::VectorXd expo = Hs * lam;
    if (expo.maxCoeff() > 700.0) return false;  // weight overflow; reject this lambda
    g_out = expo.array().exp();
    res_out = Hs.transpose() * (g_out.array() * invpi.array()).matrix() - target;
    return res_out.allFinite();
  };

  if (!eval_residual(lambda, g, residual)) {
    throw InvalidInput("rake_weights: auxiliary scale overflows at lambda = 0");
  }

  CalibratedWeights out;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if ((residual.cwiseAbs().array() <= opts.tol * res_scale.array()).all()) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd J =
        Hs.transpose() * (Hs.array().colwise() * (g.array() * invpi.array())).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(J);
    bool usable = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                  ldlt.vectorD().minCoeff() > 1e-13 * ldlt.vectorD().maxCoeff();
    if (!usable) {
      J.diagonal().array() += opts.ridge * J.trace();
      ldlt.compute(J);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw CollinearAuxiliaries("rake_weights: singular Newton system");
      }
    }
    const Eigen::VectorXd step = ldlt.solve(-residual);
    const double norm0 = (residual.array() / res_scale.array()).matrix().norm();
    double t = 1.0;
    Eigen::VectorXd g_new, res_new;
    bool accepted = false;
    while (t >= 1e-10) {
      if (eval_residual(lambda + t * step, g_new, res_new) &&
          (res_new.array() / res_scale.array()).matrix().norm() < norm0) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // stalled; report non-convergence below
    lambda += t * step;
    g = g_new;
    residual = res_new;
  }

  out.converged =
      out.converged || (residual.cwiseAbs().array() <= opts.tol * res_scale.array()).all();
  out.lambda = lambda;
  out.constraint_residual = residual;
  out.iterations = it;
  if (!out.converged) {
    throw RakeNonConvergence("rake_weights: constraints not met within iteration cap");
  }
  out.g = g;
  return out;
}

GlmFit ht_solve(Family family, const DesignMatrix& sampled_design, const Eigen::VectorXd& y_sampled,
                const Eigen::VectorXd& pi_sampled, const GlmOptions& glm_opts) {
  if ((pi_sampled.array() <= 0.0).any() || (pi_sampled.array() > 1.0).any()) {
    throw InvalidInput("ht_solve: pi must lie in (0,1]");
  }
  return fit_glm(family, sampled_design, y_sampled, pi_sampled.cwiseInverse(), glm_opts);
}

RakingEstimate raking_estimator(Family family, const DesignMatrix& cohort_design,
                                const Eigen::VectorXd& cohort_y,
                                const std::vector<std::uint8_t>& sampled, const Eigen::VectorXd& pi,
                                const AuxiliaryMatrix& aux, const RakeOptions& opts) {
  const long N = cohort_design.rows();
  if (static_cast<long>(sampled.size()) != N || pi.size() != N || cohort_y.size() != N) {
    throw DimensionMismatch("raking_estimator: cohort size mismatch");
  }
  RakingEstimate out;
  out.weights = rake_weights(aux, sampled, pi, opts);

  long n = 0;
  for (auto s : sampled) n += s ? 1 : 0;
  DesignMatrix sub;
  sub.column_names = cohort_design.column_names;
  sub.X.resize(n, cohort_design.cols());
  Eigen::VectorXd y(n), w(n);
  long r = 0;
  for (long i = 0; i < N; ++i) {
    if (!sampled[i]) continue;
    sub.X.row(r) = cohort_design.X.row(i);
    y[r] = cohort_y[i];
    w[r] = out.weights.g[r] / pi[i];
    ++r;
  }
  out.fit = fit_glm(family, sub, y, w);
  return out;
}

}  // namespace twophase

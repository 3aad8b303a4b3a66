#include "twophase/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "twophase/errors.hpp"
#include "twophase/glm.hpp"
#include "twophase/rng.hpp"

namespace twophase {

Metrics compute_metrics(const std::vector<double>& estimates, double target, long failures) {
  const long k = static_cast<long>(estimates.size());
  if (k < 2) throw InvalidInput("compute_metrics: needs K >= 2 estimates");
  double mean = 0.0;
  for (double v : estimates) mean += v;
  mean /= double(k);
  double var = 0.0, mse = 0.0;
  for (double v : estimates) {
    var += (v - mean) * (v - mean);
    mse += (v - target) * (v - target);
  }
  Metrics m;
  m.replicates = k;
  m.failures = failures;
  m.bias = mean - target;
  m.sd = std::sqrt(var / double(k));
  m.rmse = std::sqrt(mse / double(k));
  return m;
}

namespace {

// probabilists' Gauss-Hermite rule by Golub-Welsch on the Jacobi matrix
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(double(i));
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = v0 * v0;
  }
}

}  // namespace

double surrogate_indicator_moment(ScenarioKind kind, double zeta, long draws) {
  const bool additive = kind == ScenarioKind::surrogate_additive;
  if (!additive && kind != ScenarioKind::surrogate_multiplicative) {
    throw InvalidInput("surrogate_indicator_moment: surrogate scenarios only");
  }
  RngStream rng(961748927ULL, stream_domain::oracle, additive ? 1 : 2);
  double acc = 0.0;
  for (long i = 0; i < draws; ++i) {
    const double x = rng.normal();
    const double z = additive ? x + rng.normal() : rng.gamma(4.0, 4.0) * x;
    if (std::abs(z) <= zeta) acc += x * x;
  }
  return acc / double(draws);
}

PseudoTrue pseudo_true_oracle(const Scenario& sc) {
  PseudoTrue out;
  if (sc.kind == ScenarioKind::case_control) {
    if (sc.delta0 == 0.0) {
      out.alpha_star = sc.alpha0;
      out.beta_star = sc.beta0;
      return out;
    }
    static Eigen::VectorXd nodes, weights;
    static std::once_flag once;
    std::call_once(once, [] { gauss_hermite(64, nodes, weights); });

    Eigen::ArrayXd p0(nodes.size());
    for (long i = 0; i < nodes.size(); ++i) {
      const double x = nodes[i];
      const double spline = x > sc.knot ? x - sc.knot : 0.0;
      p0[i] = expit(sc.alpha0 + sc.beta0 * x + sc.delta0 * spline);
    }
    const Eigen::ArrayXd w = weights.array();
    const Eigen::ArrayXd xs = nodes.array();

    double a = sc.alpha0, b = sc.beta0;
    bool done = false;
    for (int it = 0; it < 100; ++it) {
      Eigen::ArrayXd q(nodes.size());
      for (long i = 0; i < nodes.size(); ++i) q[i] = expit(a + b * xs[i]);
      const Eigen::ArrayXd r = p0 - q;
      const double f0 = (w * r).sum();
      const double f1 = (w * r * xs).sum();
      if (std::abs(f0) < 1e-13 && std::abs(f1) < 1e-13) {
        done = true;
        break;
      }
      const Eigen::ArrayXd v = q * (1.0 - q);
      const double j00 = (w * v).sum();
      const double j01 = (w * v * xs).sum();
      const double j11 = (w * v * xs * xs).sum();
      const double det = j00 * j11 - j01 * j01;
      if (std::abs(det) < 1e-30) throw NonConvergence("pseudo_true_oracle: singular Jacobian");
      a += (j11 * f0 - j01 * f1) / det;
      b += (j00 * f1 - j01 * f0) / det;
    }
    if (!done) throw NonConvergence("pseudo_true_oracle: Newton did not converge");
    out.alpha_star = a;
    out.beta_star = b;
    return out;
  }

  if (sc.kind == ScenarioKind::nwts) {
    throw InvalidInput("pseudo_true_oracle: not defined for the data example");
  }

  if (sc.delta0 == 0.0) {
    out.alpha_star = sc.alpha0;
    out.beta_star = sc.beta0;
    out.sigma2_star = 1.0;
    return out;
  }
  static std::map<std::pair<int, double>, double> cache;
  static std::mutex mu;
  const std::pair<int, double> key{static_cast<int>(sc.kind), sc.knot};
  double c;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, surrogate_indicator_moment(sc.kind, sc.knot)).first;
    }
    c = it->second;
  }
  out.indicator_moment = c;
  out.alpha_star = sc.alpha0;
  out.beta_star = sc.beta0 + sc.delta0 * c;
  out.sigma2_star = 1.0 + sc.delta0 * sc.delta0 * c * (1.0 - c);
  return out;
}

}  // namespace twophase

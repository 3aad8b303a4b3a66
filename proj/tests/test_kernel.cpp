#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "twophase/kernel.hpp"
#include "twophase/rng.hpp"

using namespace twophase;

TEST_CASE("kernel regression limits") {
  Eigen::VectorXd x(6), y(6);
  x << -2, -1, 0, 1, 2, 3;
  y << 4, 1, 0, 1, 4, 9;
  SUBCASE("flat kernel limit returns the mean") {
    const double h = 1e6 * 5.0;
    const KernelFit fit = kernel_regression(x, y, h);
    for (long i = 0; i < 6; ++i) {
      CHECK(std::abs(fit.fitted[i] - y.mean()) < 1e-6);
    }
  }
  SUBCASE("narrow kernel limit interpolates") {
    const KernelFit fit = kernel_regression(x, y, 1e-3);
    for (long i = 0; i < 6; ++i) {
      CHECK(fit.fitted[i] == doctest::Approx(y[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("kernel regression equals the brute-force double loop") {
  RngStream rng(61, stream_domain::test, 90);
  Eigen::VectorXd x(10), y(10);
  for (long i = 0; i < 10; ++i) {
    x[i] = 2.0 * rng.uniform01() - 1.0;
    y[i] = std::sin(3.0 * x[i]) + 0.1 * rng.normal();
  }
  const double h = 0.5;
  const KernelFit fit = kernel_regression(x, y, h);
  for (long i = 0; i < 10; ++i) {
    double num = 0.0, den = 0.0;
    for (long j = 0; j < 10; ++j) {
      const double u = (x[i] - x[j]) / h;
      const double w = std::exp(-0.5 * u * u);
      num += w * y[j];
      den += w;
    }
    CHECK(std::abs(fit.fitted[i] - num / den) < 1e-12);
  }
}

TEST_CASE("evaluator exact path reproduces kernel_regression on random inputs") {
  RngStream rng(62, stream_domain::test, 91);
  for (int rep = 0; rep < 25; ++rep) {
    const long n = 5 + static_cast<long>(rng.uniform_index(60));
    Eigen::VectorXd x(n), y(n);
    for (long i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    const double h = 0.05 + rng.uniform01();
    const NadarayaWatsonEvaluator eval(x, false);
    const Eigen::VectorXd fast = eval.fitted(y, h);
    const KernelFit ref = kernel_regression(x, y, h);
    CHECK((fast - ref.fitted).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("binned path approximates the exact sums closely") {
  RngStream rng(63, stream_domain::test, 92);
  const long n = 3000;
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = std::sin(2.0 * x[i]) + 0.5 * rng.normal();
  }
  const NadarayaWatsonEvaluator exact(x, false);
  const NadarayaWatsonEvaluator binned(x, true);
  for (const double h : {0.05, 0.15, 0.5, 1.5}) {
    const Eigen::VectorXd fe = exact.fitted(y, h);
    const Eigen::VectorXd fb = binned.fitted(y, h);
    const double scale = fe.cwiseAbs().maxCoeff();
    CHECK((fe - fb).cwiseAbs().maxCoeff() < 0.01 * (1.0 + scale));
    const double cve = exact.loo_cv(y, h);
    const double cvb = binned.loo_cv(y, h);
    CHECK(std::abs(cve - cvb) < 0.01 * (1.0 + std::abs(cve)));
  }
}

TEST_CASE("bandwidth selection behavior") {
  SUBCASE("pure noise prefers heavy smoothing") {
    int top_quartile = 0;
    for (int seed = 0; seed < 100; ++seed) {
      RngStream rng(64, stream_domain::test, 100 + seed);
      const long n = 1500;
      Eigen::VectorXd x(n), y(n);
      for (long i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();  // independent of x
      }
      const double h_ref = silverman_bandwidth(x);
      const double h = loo_bandwidth(x, y);
      // top quartile of the 40-point grid starts at index 30; allow the
      // one-step golden-section bracket around it
      const double boundary = h_ref * 0.05 * std::pow(100.0, 29.0 / 39.0);
      if (h >= boundary) ++top_quartile;
    }
    CHECK(top_quartile >= 90);
  }
  SUBCASE("sharp sinusoid prefers the bottom half") {
    int bottom_half = 0;
    for (int seed = 0; seed < 100; ++seed) {
      RngStream rng(65, stream_domain::test, 200 + seed);
      const long n = 500;
      Eigen::VectorXd x(n), y(n);
      for (long i = 0; i < n; ++i) {
        x[i] = 2.0 * rng.uniform01() - 1.0;
        y[i] = std::sin(12.0 * x[i]) + 0.1 * rng.normal();
      }
      const double h_ref = silverman_bandwidth(x);
      const double h = loo_bandwidth(x, y);
      const double mid = h_ref * 0.05 * std::pow(100.0, 0.5);
      if (h <= mid) ++bottom_half;
    }
    CHECK(bottom_half >= 90);
  }
  SUBCASE("flat CV curve falls back to the reference bandwidth") {
    Eigen::VectorXd x(3), y(3);
    x << 1.0, 2.0, 3.0;
    y << 5.0, 5.0, 5.0;
    const double h = loo_bandwidth(x, y);
    CHECK(h == doctest::Approx(silverman_bandwidth(x)).epsilon(1e-12));
  }
}

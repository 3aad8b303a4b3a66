#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "twophase/diagnostics.hpp"
#include "twophase/glm.hpp"
#include "twophase/metrics.hpp"

using namespace twophase;

TEST_CASE("mp test randomizes to the level when the models coincide") {
  const Scenario sc = case_control_scenario(1.0, 0.0, 2000);
  // theta* equals theta0 exactly, so every statistic is exactly zero
  const MpNullDistribution null_dist =
      mp_null_distribution(sc, sc.alpha0, sc.beta0, 1.0, 400, 123);
  for (double s : null_dist.sorted) CHECK(s == 0.0);

  RngStream tie(71, stream_domain::mp_tie, 0);
  int rejects = 0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(71, stream_domain::cohort, r);
    const Cohort c = gen_casecontrol_cohort(sc, rng);
    const double stat = mp_statistic(c, sc.alpha0, sc.beta0);
    CHECK(stat == 0.0);
    rejects += mp_test(stat, null_dist, 0.05, tie).reject ? 1 : 0;
  }
  const double rate = double(rejects) / reps;
  CHECK(std::abs(rate - 0.05) < 0.015);
}

TEST_CASE("mp test null rejection stays near the level for a separated alternative") {
  Scenario sc = case_control_scenario(0.844, 0.7, 3000);
  const PseudoTrue star = pseudo_true_oracle(sc);
  const MpNullDistribution null_dist =
      mp_null_distribution(sc, star.alpha_star, star.beta_star, 1.0, 2000, 321);
  // data generated from the theta* model must reject at ~5 percent
  RngStream tie(72, stream_domain::mp_tie, 1);
  int rejects = 0;
  const int reps = 800;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(72, stream_domain::mp_null, 10000 + r);
    Cohort c;
    c.scenario = sc;
    c.y.resize(sc.cohort_size);
    c.x.resize(sc.cohort_size);
    c.stratum.assign(sc.cohort_size, 0);
    for (long i = 0; i < sc.cohort_size; ++i) {
      c.x[i] = rng.normal();
      c.y[i] = rng.bernoulli(expit(star.alpha_star + star.beta_star * c.x[i])) ? 1.0 : 0.0;
    }
    const double stat = mp_statistic(c, star.alpha_star, star.beta_star);
    rejects += mp_test(stat, null_dist, 0.05, tie).reject ? 1 : 0;
  }
  CHECK(std::abs(double(rejects) / reps - 0.05) < 0.03);
}

TEST_CASE("gof rejects a grossly nonlinear signal") {
  RngStream rng(73, stream_domain::test, 110);
  const long n = 300;
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = 2.0 * rng.uniform01() - 1.0;
    y[i] = x[i] * x[i] * x[i] + 0.05 * rng.normal();
  }
  GofOptions opts;
  opts.bootstrap_reps = 200;
  RngStream grng(73, stream_domain::gof, 0);
  const TestResult res = gof_linearity_test(x, y, opts, grng);
  CHECK(res.p_value < 0.01);
  CHECK(res.reject);
}

TEST_CASE("gof holds its size under a true linear model") {
  int rejects = 0;
  const int reps = 60;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(74, stream_domain::test, 120 + r);
    const long n = 150;
    Eigen::VectorXd x(n), y(n);
    for (long i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 1.0 + 2.0 * x[i] + rng.normal();
    }
    GofOptions opts;
    opts.bootstrap_reps = 99;
    RngStream grng(74, stream_domain::gof, r);
    rejects += gof_linearity_test(x, y, opts, grng).reject ? 1 : 0;
  }
  CHECK(double(rejects) / reps < 0.2);
}

TEST_CASE("gof p-value is invariant to affine rescaling of x") {
  RngStream rng(75, stream_domain::test, 130);
  const long n = 120;
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = 0.5 - 0.7 * x[i] + rng.normal();
  }
  GofOptions opts;
  opts.bootstrap_reps = 99;
  RngStream g1(75, stream_domain::gof, 0);
  RngStream g2(75, stream_domain::gof, 0);
  const TestResult a = gof_linearity_test(x, y, opts, g1);
  const TestResult b = gof_linearity_test((x.array() * 13.0 - 4.0).matrix(), y, opts, g2);
  CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
}

TEST_CASE("gof input validation") {
  Eigen::VectorXd x(5), y(5);
  x << 1, 2, 3, 4, 5;
  y << 1, 2, 3, 4, 5;
  GofOptions opts;
  RngStream rng(76, stream_domain::gof, 0);
  CHECK_THROWS_AS(gof_linearity_test(x, y, opts, rng), InvalidInput);  // n < 10
  Eigen::VectorXd x2(12), y2(12);
  for (int i = 0; i < 12; ++i) {
    x2[i] = i;
    y2[i] = i;
  }
  opts.bootstrap_reps = 20;  // B < 50
  CHECK_THROWS_AS(gof_linearity_test(x2, y2, opts, rng), InvalidInput);
}

TEST_CASE("binary gof adaptation runs and holds size roughly") {
  int rejects = 0;
  const int reps = 30;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(77, stream_domain::test, 140 + r);
    const long n = 400;
    Eigen::VectorXd x(n), y(n);
    for (long i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.bernoulli(expit(-1.0 + 0.8 * x[i])) ? 1.0 : 0.0;
    }
    GofOptions opts;
    opts.bootstrap_reps = 99;
    opts.binary = true;
    RngStream grng(77, stream_domain::gof, r);
    rejects += gof_linearity_test(x, y, opts, grng).reject ? 1 : 0;
  }
  CHECK(double(rejects) / reps < 0.25);
}

TEST_CASE("correlation diagnostic") {
  SUBCASE("affine series correlate exactly") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 10; ++i) {
      xs.push_back(0.3 * i - 1.0);
      ys.push_back(2.0 * xs.back() + 3.0);
    }
    CHECK(mle_raking_lr_correlation(ys, xs) == doctest::Approx(1.0).epsilon(1e-12));
    // sign flips are absorbed by the absolute value
    for (auto& v : ys) v = -v;
    CHECK(mle_raking_lr_correlation(ys, xs) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant series raise DegenerateVariance") {
    std::vector<double> c{1.0, 1.0, 1.0};
    std::vector<double> v{0.5, 0.7, 0.2};
    CHECK_THROWS_AS(mle_raking_lr_correlation(c, v), DegenerateVariance);
  }
  SUBCASE("needs three replicates") {
    std::vector<double> a{1.0, 2.0};
    CHECK_THROWS_AS(mle_raking_lr_correlation(a, a), InvalidInput);
  }
}

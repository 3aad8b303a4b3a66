#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "twophase/designs.hpp"
#include "twophase/impute.hpp"
#include "twophase/nwts.hpp"

using namespace twophase;

namespace {

Cohort small_casecontrol(RngStream& rng, long n_cases = 30, long n_controls = 120) {
  Scenario sc = case_control_scenario(1.0, 0.0);
  sc.cohort_size = n_cases + n_controls;
  Cohort c;
  c.scenario = sc;
  c.y.resize(sc.cohort_size);
  c.x.resize(sc.cohort_size);
  c.stratum.assign(sc.cohort_size, 0);
  for (long i = 0; i < sc.cohort_size; ++i) {
    c.y[i] = i < n_cases ? 1.0 : 0.0;
    c.x[i] = rng.normal() + 0.8 * c.y[i];
    c.stratum[i] = int(c.y[i]);
  }
  c.n_strata = 2;
  return c;
}

TwoPhaseSample half_sample(const Cohort& c, RngStream& rng) {
  TwoPhaseSample s;
  s.R.assign(c.size(), 0);
  s.pi = Eigen::VectorXd::Constant(c.size(), 0.5);
  s.s2_size = 0;
  for (long i = 0; i < c.size(); ++i) {
    s.R[i] = rng.bernoulli(0.5) ? 1 : 0;
    s.s2_size += s.R[i];
  }
  return s;
}

}  // namespace

TEST_CASE("parametric normal engine: moments and degenerate variance") {
  RngStream rng(41, stream_domain::test, 60);
  const Cohort c = small_casecontrol(rng);
  TwoPhaseSample s = half_sample(c, rng);
  s.R[0] = s.R[c.size() - 1] = 1;  // keep both classes in phase 2

  // recover the fitted parameters from the phase-2 data
  double sum0 = 0, sum1 = 0;
  long n0 = 0, n1 = 0;
  for (long i = 0; i < c.size(); ++i) {
    if (!s.R[i]) continue;
    (c.y[i] > 0.5 ? sum1 : sum0) += c.x[i];
    (c.y[i] > 0.5 ? n1 : n0) += 1;
  }
  const double mu = sum0 / n0, eta = sum1 / n1 - sum0 / n0;

  const long draws = 100000;
  double acc0 = 0, acc1 = 0, accsq = 0;
  long m0 = 0, m1 = 0;
  RngStream drng(41, stream_domain::impute_mi, 0, 0);
  for (long d = 0; d < draws / 1000; ++d) {
    const ImputationDraw draw = impute_parametric_normal(c, s, drng);
    for (long i = 0; i < c.size(); ++i) {
      if (s.R[i]) {
        CHECK(draw.x_star[i] == c.x[i]);  // observed values preserved bit-exactly
        continue;
      }
      if (c.y[i] > 0.5) {
        acc1 += draw.x_star[i];
        ++m1;
      } else {
        acc0 += draw.x_star[i];
        ++m0;
      }
      accsq += (draw.x_star[i] - mu - eta * c.y[i]) * (draw.x_star[i] - mu - eta * c.y[i]);
    }
  }
  // imputed means track mu + eta y within Monte Carlo tolerance
  if (m0 > 1000) CHECK(acc0 / m0 == doctest::Approx(mu).epsilon(0.1));
  if (m1 > 200) CHECK(std::abs(acc1 / m1 - (mu + eta)) < 0.25);
  CHECK(accsq / (m0 + m1) < 3.0);

  SUBCASE("constant within-class x raises DegenerateVariance") {
    Cohort flat = c;
    for (long i = 0; i < c.size(); ++i) flat.x[i] = c.y[i] > 0.5 ? 2.0 : -1.0;
    CHECK_THROWS_AS(impute_parametric_normal(flat, s, drng), DegenerateVariance);
  }
  SUBCASE("missing class raises DegenerateVariance") {
    TwoPhaseSample only_controls = s;
    for (long i = 0; i < c.size(); ++i) {
      if (c.y[i] > 0.5) only_controls.R[i] = 0;
    }
    CHECK_THROWS_AS(impute_parametric_normal(c, only_controls, drng), DegenerateVariance);
  }
}

TEST_CASE("empirical engine draws from the phase-2 control distribution") {
  RngStream rng(42, stream_domain::test, 61);
  const Cohort c = small_casecontrol(rng);
  const TwoPhaseSample s = half_sample(c, rng);

  std::vector<double> source;
  for (long i = 0; i < c.size(); ++i) {
    if (s.R[i] && c.y[i] < 0.5) source.push_back(c.x[i]);
  }
  REQUIRE(!source.empty());
  std::sort(source.begin(), source.end());

  RngStream drng(42, stream_domain::impute_mi, 0, 0);
  std::vector<double> drawn;
  for (int d = 0; d < 400; ++d) {
    const ImputationDraw draw = impute_empirical(c, s, drng);
    for (long i = 0; i < c.size(); ++i) {
      if (!s.R[i]) drawn.push_back(draw.x_star[i]);
    }
  }
  // Kolmogorov distance between draw ECDF and the source ECDF
  std::sort(drawn.begin(), drawn.end());
  double ks = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    const double cdf_src = double(j + 1) / double(source.size());
    const auto it = std::upper_bound(drawn.begin(), drawn.end(), source[j]);
    const double cdf_drawn = double(it - drawn.begin()) / double(drawn.size());
    ks = std::max(ks, std::abs(cdf_src - cdf_drawn));
  }
  CHECK(ks < 0.01);

  SUBCASE("all controls equal means all imputations equal") {
    Cohort flat = c;
    for (long i = 0; i < c.size(); ++i) {
      if (c.y[i] < 0.5) flat.x[i] = 3.25;
    }
    const ImputationDraw draw = impute_empirical(flat, s, drng);
    for (long i = 0; i < c.size(); ++i) {
      if (!s.R[i]) CHECK(draw.x_star[i] == 3.25);
    }
  }
  SUBCASE("no phase-2 controls raises EmptySource") {
    TwoPhaseSample cases_only = s;
    for (long i = 0; i < c.size(); ++i) {
      if (c.y[i] < 0.5) cases_only.R[i] = 0;
    }
    CHECK_THROWS_AS(impute_empirical(c, cases_only, drng), EmptySource);
  }
}

namespace {

Cohort small_surrogate(RngStream& rng, long n = 300) {
  Scenario sc = surrogate_scenario(ScenarioKind::surrogate_additive, 1.0, 0.0, n);
  return gen_surrogate_cohort(sc, rng);
}

}  // namespace

TEST_CASE("wild bootstrap: zero residuals collapse to the fitted means") {
  RngStream rng(43, stream_domain::test, 62);
  Cohort c = small_surrogate(rng);
  const TwoPhaseSample s = half_sample(c, rng);
  // make x exactly linear in (1, y, z) so phase-2 residuals vanish
  for (long i = 0; i < c.size(); ++i) c.x[i] = 0.3 + 0.5 * c.y[i] - 0.2 * c.z[i];
  RngStream drng(43, stream_domain::impute_mir, 0, 0);
  const ImputationDraw d = impute_wild_bootstrap(c, s, drng);
  for (long i = 0; i < c.size(); ++i) {
    CHECK(d.x_resampled[i] == doctest::Approx(0.3 + 0.5 * c.y[i] - 0.2 * c.z[i]).epsilon(1e-9));
  }
}

TEST_CASE("wild bootstrap refits are centered on the phase-2 coefficients") {
  RngStream rng(44, stream_domain::test, 63);
  const Cohort c = small_surrogate(rng, 500);
  const TwoPhaseSample s = half_sample(c, rng);

  // direct phase-2 regression for reference
  long n2 = 0;
  for (long i = 0; i < c.size(); ++i) n2 += s.R[i];
  Eigen::MatrixXd W(n2, 3);
  Eigen::VectorXd xs(n2);
  long r = 0;
  for (long i = 0; i < c.size(); ++i) {
    if (!s.R[i]) continue;
    W.row(r) << 1.0, c.y[i], c.z[i];
    xs[r] = c.x[i];
    ++r;
  }
  const Eigen::Vector3d ref = (W.transpose() * W).ldlt().solve(W.transpose() * xs);

  // mean of imputed values for unsampled units should track a + b y + c z
  RngStream drng(44, stream_domain::impute_mir, 0, 0);
  const int reps = 200;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(c.size());
  for (int d = 0; d < reps; ++d) {
    acc += impute_wild_bootstrap(c, s, drng).x_resampled;
  }
  acc /= double(reps);
  double worst = 0.0;
  for (long i = 0; i < c.size(); ++i) {
    const double mean_model = ref[0] + ref[1] * c.y[i] + ref[2] * c.z[i];
    worst = std::max(worst, std::abs(acc[i] - mean_model));
  }
  // tau ~ 0.9, reps = 200 -> se ~ 0.064; allow 4 se plus refit noise
  CHECK(worst < 0.35);
}

TEST_CASE("bayesian engine: inverse-gamma mean and posterior contraction") {
  RngStream rng(45, stream_domain::test, 64);
  const Cohort c = small_surrogate(rng, 400);
  const TwoPhaseSample s = half_sample(c, rng);

  long n2 = 0;
  for (long i = 0; i < c.size(); ++i) n2 += s.R[i];
  Eigen::MatrixXd W(n2, 3);
  Eigen::VectorXd xs(n2);
  long r = 0;
  for (long i = 0; i < c.size(); ++i) {
    if (!s.R[i]) continue;
    W.row(r) << 1.0, c.y[i], c.z[i];
    xs[r] = c.x[i];
    ++r;
  }
  const Eigen::Vector3d coef = (W.transpose() * W).ldlt().solve(W.transpose() * xs);
  const double rss = (xs - W * coef).squaredNorm();
  const double a_n = double(n2 - 3);

  RngStream drng(45, stream_domain::impute_mir, 0, 0);
  const int reps = 10000;
  double tau_acc = 0.0;
  for (int d = 0; d < reps; ++d) tau_acc += drng.inv_gamma(a_n / 2.0, rss / 2.0);
  CHECK(tau_acc / reps == doctest::Approx(rss / (a_n - 2.0)).epsilon(0.03));

  // slope draws concentrate like |S2|^{-1/2}: compare two sample sizes
  auto slope_sd = [&](long n_target, std::uint64_t salt) {
    RngStream g(45, stream_domain::test, salt);
    Scenario sc = surrogate_scenario(ScenarioKind::surrogate_additive, 1.0, 0.0, n_target);
    const Cohort cc = gen_surrogate_cohort(sc, g);
    TwoPhaseSample all;
    all.R.assign(cc.size(), 1);
    all.pi = Eigen::VectorXd::Ones(cc.size());
    all.s2_size = cc.size();
    RngStream dd(45, stream_domain::impute_mir, salt, 0);
    double sum = 0, sum2 = 0;
    const int m = 400;
    for (int d = 0; d < m; ++d) {
      // recover b* from draws: regress the imputed values on (1, y, z) again
      const ImputationDraw draw = impute_bayesian(cc, all, dd);
      (void)draw;
      // cheaper: directly draw the coefficient via the engine internals is not
      // exposed; instead use the variance of imputed values at a fixed unit
      sum += draw.x_resampled[0];
      sum2 += draw.x_resampled[0] * draw.x_resampled[0];
    }
    return std::sqrt(std::max(sum2 / m - (sum / m) * (sum / m), 0.0));
  };
  // the per-unit draw spread is dominated by tau, which does not shrink;
  // instead verify the coefficient uncertainty via repeated tau draws
  const double sd_small = slope_sd(200, 70);
  const double sd_large = slope_sd(3200, 71);
  CHECK(sd_large < sd_small * 1.25);  // no blow-up at scale

  SUBCASE("tiny phase 2 is rejected") {
    Cohort tiny = c;
    TwoPhaseSample s3;
    s3.R.assign(c.size(), 0);
    s3.pi = Eigen::VectorXd::Constant(c.size(), 0.01);
    s3.R[0] = s3.R[1] = s3.R[2] = 1;
    s3.s2_size = 3;
    CHECK_THROWS_AS(impute_bayesian(tiny, s3, drng), InvalidInput);
  }
}

TEST_CASE("bayesian coefficient draws contract at the |S2|^{-1/2} rate") {
  // measure sd of the imputed-value mean over a large block of units, which
  // isolates the coefficient noise from the idiosyncratic tau noise
  auto block_mean_sd = [&](long n_cohort, std::uint64_t salt) {
    RngStream g(46, stream_domain::test, salt);
    Scenario sc = surrogate_scenario(ScenarioKind::surrogate_additive, 1.0, 0.0, n_cohort);
    const Cohort cc = gen_surrogate_cohort(sc, g);
    TwoPhaseSample all;
    all.R.assign(cc.size(), 1);
    all.pi = Eigen::VectorXd::Ones(cc.size());
    all.s2_size = cc.size();
    RngStream dd(46, stream_domain::impute_mir, salt, 0);
    const int m = 300;
    double sum = 0, sum2 = 0;
    for (int d = 0; d < m; ++d) {
      const ImputationDraw draw = impute_bayesian(cc, all, dd);
      const double v = draw.x_resampled.mean();
      sum += v;
      sum2 += v * v;
    }
    return std::sqrt(std::max(sum2 / m - (sum / m) * (sum / m), 0.0));
  };
  const double sd1 = block_mean_sd(400, 80);
  const double sd2 = block_mean_sd(6400, 81);
  // 16x more data -> 4x tighter coefficients; block mean adds a 1/sqrt(N)
  // tau term with the same rate, so the ratio should be ~4
  CHECK(sd1 / sd2 > 2.0);
  CHECK(sd1 / sd2 < 8.0);
}

TEST_CASE("rubin_combine hand example and invariants") {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> ests;
  Eigen::VectorXd t1(1), t2(1), t3(1), v(1);
  t1 << 1.0;
  t2 << 1.2;
  t3 << 1.1;
  v << 0.04;
  ests = {{t1, v}, {t2, v}, {t3, v}};
  const MIEstimate mi = rubin_combine(ests);
  CHECK(mi.theta_bar[0] == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(mi.within_var[0] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(mi.between_var[0] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(mi.total_var[0] == doctest::Approx(0.04 + (4.0 / 3.0) * 0.01).epsilon(1e-12));

  SUBCASE("M = 1 degenerates to the single estimate") {
    const MIEstimate one = rubin_combine({{t1, v}});
    CHECK(one.theta_bar[0] == 1.0);
    CHECK(one.between_var[0] == 0.0);
    CHECK(one.total_var[0] == v[0]);
  }
  SUBCASE("identical imputations have zero between-variance") {
    const MIEstimate same = rubin_combine({{t1, v}, {t1, v}, {t1, v}});
    CHECK(same.between_var[0] == 0.0);
    CHECK(same.total_var[0] == v[0]);
  }
  SUBCASE("permutation invariance and linearity in the estimates") {
    const MIEstimate p1 = rubin_combine({{t2, v}, {t3, v}, {t1, v}});
    CHECK(p1.theta_bar[0] == doctest::Approx(mi.theta_bar[0]).epsilon(1e-15));
    CHECK(p1.total_var[0] == doctest::Approx(mi.total_var[0]).epsilon(1e-15));
  }
  SUBCASE("total never below within") {
    CHECK((mi.total_var - mi.within_var).minCoeff() >= 0.0);
  }
  SUBCASE("dimension mismatch") {
    Eigen::VectorXd bad(2);
    bad << 1.0, 2.0;
    CHECK_THROWS_AS(rubin_combine({{t1, v}, {bad, v}}), DimensionMismatch);
  }
}

TEST_CASE("engine determinism: same stream, same draw") {
  RngStream rng(47, stream_domain::test, 65);
  const Cohort c = small_surrogate(rng);
  const TwoPhaseSample s = half_sample(c, rng);
  RngStream d1(47, stream_domain::impute_mi, 9, 3);
  RngStream d2(47, stream_domain::impute_mi, 9, 3);
  const ImputationDraw a = impute_wild_bootstrap(c, s, d1);
  const ImputationDraw b = impute_wild_bootstrap(c, s, d2);
  CHECK((a.x_star - b.x_star).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.x_resampled - b.x_resampled).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mi_calibration_variable averages influence and shrinks like 1/M") {
  RngStream rng(48, stream_domain::test, 66);
  const Cohort c = small_surrogate(rng, 400);
  const TwoPhaseSample s = half_sample(c, rng);

  auto make_draws = [&](int M, std::uint64_t salt) {
    std::vector<Eigen::VectorXd> draws;
    RngStream dr(48, stream_domain::impute_mir, salt, 0);
    for (int m = 0; m < M; ++m) draws.push_back(impute_wild_bootstrap(c, s, dr).x_resampled);
    return draws;
  };
  auto builder = [](const Eigen::VectorXd& xv) { return intercept_design(xv); };

  SUBCASE("M = 1 equals the single-draw influence matrix") {
    const auto draws = make_draws(1, 1);
    const AuxiliaryMatrix aux = mi_calibration_variable(draws, Family::linear, builder, c.y);
    const GlmFit fit = fit_glm(Family::linear, intercept_design(draws[0]), c.y);
    CHECK((aux.H - fit.influence).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("component variance shrinks roughly like 1/M") {
    auto batch_var = [&](int M, int batches) {
      // variance across independent H matrices of the first unit's slope column
      double sum = 0, sum2 = 0;
      for (int b = 0; b < batches; ++b) {
        const auto draws = make_draws(M, 100 + b + 1000 * M);
        const AuxiliaryMatrix aux = mi_calibration_variable(draws, Family::linear, builder, c.y);
        const double v = aux.H(0, 1);
        sum += v;
        sum2 += v * v;
      }
      return sum2 / batches - (sum / batches) * (sum / batches);
    };
    const double v10 = batch_var(10, 40);
    const double v100 = batch_var(100, 40);
    CHECK(v10 / std::max(v100, 1e-30) > 3.0);  // ~10x with Monte Carlo slack
  }
}

TEST_CASE("binary bootstrap engine on a synthetic cohort") {
  RngStream rng(49, stream_domain::test, 67);
  const NwtsCohort c = synthetic_nwts_cohort(1500, rng);
  RngStream srng(49, stream_domain::sample, 0);
  const TwoPhaseSample s = sample_nwts_design(c, srng);

  RngStream drng(49, stream_domain::impute_mi, 0, 0);
  const ImputationDraw d = impute_bootstrap_binary(c, s, drng);
  for (long i = 0; i < c.size(); ++i) {
    CHECK((d.x_resampled[i] == 0.0 || d.x_resampled[i] == 1.0));
    if (s.R[i]) CHECK(d.x_star[i] == double(c.histol[i]));
  }

  // imputed-value frequency tracks the refit probabilities: with a fixed
  // stream the refit varies per draw, so check the aggregate rate is sane
  long imputed_ones = 0, imputed_total = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const ImputationDraw dd = impute_bootstrap_binary(c, s, drng);
    for (long i = 0; i < c.size(); ++i) {
      if (!s.R[i]) {
        imputed_ones += dd.x_star[i] > 0.5;
        ++imputed_total;
      }
    }
  }
  const double rate = double(imputed_ones) / double(imputed_total);
  CHECK(rate > 0.0);
  CHECK(rate < 0.5);
}

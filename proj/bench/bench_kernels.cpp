// Timing comparison of the parallel/fast paths against their serial
// references: binned vs exact kernel sums, and the OpenMP replicate loop vs a
// single thread. The parallel results must match the reference bit-for-bit
// (harness) or to stated accuracy (kernel).
#include <chrono>
#include <cstdio>

#include "twophase/harness.hpp"
#include "twophase/kernel.hpp"
#include "twophase/rng.hpp"

using namespace twophase;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void bench_kernel(long n) {
  RngStream rng(404, stream_domain::test, static_cast<std::uint64_t>(n));
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = std::sin(2.0 * x[i]) + 0.5 * rng.normal();
  }
  const NadarayaWatsonEvaluator exact(x, false);
  const NadarayaWatsonEvaluator binned(x, true);
  const double h_ref = silverman_bandwidth(x);

  const int sweeps = 3;
  auto cv_sweep = [&](const NadarayaWatsonEvaluator& eval) {
    double acc = 0.0;
    for (int s = 0; s < sweeps; ++s) {
      for (int g = 0; g < 40; ++g) {
        const double h = 0.05 * h_ref * std::exp(std::log(100.0) * g / 39.0);
        acc += eval.loo_cv(y, h);
      }
    }
    return acc;
  };

  auto t0 = clock_type::now();
  const double a = cv_sweep(exact);
  const double t_exact = seconds_since(t0);
  t0 = clock_type::now();
  const double b = cv_sweep(binned);
  const double t_binned = seconds_since(t0);

  double max_rel = 0.0;
  for (int g = 0; g < 40; ++g) {
    const double h = 0.05 * h_ref * std::exp(std::log(100.0) * g / 39.0);
    const double ce = exact.loo_cv(y, h);
    const double cb = binned.loo_cv(y, h);
    max_rel = std::max(max_rel, std::abs(ce - cb) / (1.0 + std::abs(ce)));
  }
  std::printf("kernel n=%6ld  exact %8.3fs  binned %8.3fs  speedup %5.1fx  max rel dev %.2e\n", n,
              t_exact, t_binned, t_exact / t_binned, max_rel);
  (void)a;
  (void)b;
}

void bench_harness() {
  ExperimentConfig cfg;
  cfg.scenario = ScenarioKind::surrogate_additive;
  cfg.grid_rows = {0};
  cfg.replicates = 60;
  cfg.imputations = 10;
  cfg.cohort_size = 2000;
  cfg.diag_replicates = 0;
  cfg.estimators = {"raking", "rc", "mi_boot", "mir_boot"};
  cfg.seed = 17;

  cfg.parallelism = 1;
  auto t0 = clock_type::now();
  const MonteCarloReport serial = run_monte_carlo(cfg);
  const double t_serial = seconds_since(t0);

  cfg.parallelism = 0;  // all available threads
  t0 = clock_type::now();
  const MonteCarloReport parallel = run_monte_carlo(cfg);
  const double t_parallel = seconds_since(t0);

  std::printf("harness K=%d     serial %8.3fs  openmp %8.3fs  speedup %5.2fx  identical: %s\n",
              cfg.replicates, t_serial, t_parallel, t_serial / t_parallel,
              serial.same_values(parallel) ? "yes" : "NO");
}

}  // namespace

int main() {
  std::printf("fast kernels vs serial references\n");
  bench_kernel(2000);
  bench_kernel(10000);
  bench_harness();
  return 0;
}

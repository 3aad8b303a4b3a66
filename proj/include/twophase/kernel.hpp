#pragma once

#include <Eigen/Dense>
#include <vector>

namespace twophase {

struct KernelFit {
  double bandwidth = 0.0;
  Eigen::VectorXd fitted;  // m_hat(x_i) at the sample points
  double cv_score = 0.0;   // leave-one-out CV at this bandwidth
  int fallback_count = 0;  // points where all kernel mass underflowed
};

// Nadaraya-Watson with a Gaussian kernel, exact double-sum evaluation.
KernelFit kernel_regression(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double bandwidth);

double silverman_bandwidth(const Eigen::VectorXd& x);

// Reusable evaluator over a fixed design: the exact path is the serial
// reference; the binned path approximates the same sums on an h/4 grid and is
// what the bootstrap loops use. Only y and h change between calls.
class NadarayaWatsonEvaluator {
 public:
  NadarayaWatsonEvaluator(const Eigen::VectorXd& x, bool use_binned);

  double loo_cv(const Eigen::VectorXd& y, double bandwidth) const;
  Eigen::VectorXd fitted(const Eigen::VectorXd& y, double bandwidth,
                         int* fallback_count = nullptr) const;
  long n() const { return static_cast<long>(order_.size()); }
  bool binned() const { return binned_; }

 private:
  void sums(const Eigen::VectorXd& y, double h, Eigen::VectorXd& num, Eigen::VectorXd& den) const;

  Eigen::VectorXd x_sorted_;
  std::vector<long> order_;  // x_sorted_[k] = x[order_[k]]
  bool binned_ = false;
  double range_ = 0.0;
};

struct LooBandwidthOptions {
  double lo_factor = 0.05;
  double hi_factor = 5.0;
  int grid_points = 40;
  bool use_binned_above = true;  // switch to the binned evaluator for large n
};

// Minimizes the leave-one-out CV criterion over a logarithmic bandwidth grid
// spanning [lo, hi] x Silverman, then refines once by golden section. A flat
// CV curve falls back to the Silverman reference bandwidth.
double loo_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     const LooBandwidthOptions& opts = {});
double loo_bandwidth(const NadarayaWatsonEvaluator& eval, double reference_bandwidth,
                     const Eigen::VectorXd& y, const LooBandwidthOptions& opts = {});

}  // namespace twophase

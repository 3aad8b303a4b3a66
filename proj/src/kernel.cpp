#include "twophase/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twophase/errors.hpp"

namespace twophase {

namespace {

constexpr double k_cutoff = 9.0;  // gaussian kernel support in h units; tail < 3e-18

double nearest_neighbor_value(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, double at,
                              long skip) {
  double best = std::numeric_limits<double>::infinity();
  double val = 0.0;
  for (long j = 0; j < xs.size(); ++j) {
    if (j == skip) continue;
    const double d = std::abs(xs[j] - at);
    if (d < best) {
      best = d;
      val = ys[j];
    }
  }
  return val;
}

}  // namespace

KernelFit kernel_regression(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double bandwidth) {
  const long n = x.size();
  if (n < 2 || y.size() != n) throw InvalidInput("kernel_regression: need n >= 2 matched vectors");
  if (!(bandwidth > 0.0)) throw InvalidInput("kernel_regression: bandwidth must be positive");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("kernel_regression: non-finite input");

  KernelFit fit;
  fit.bandwidth = bandwidth;
  fit.fitted.resize(n);
  double cv = 0.0;
  for (long i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    for (long j = 0; j < n; ++j) {
      const double u = (x[i] - x[j]) / bandwidth;
      const double w = std::exp(-0.5 * u * u);
      num += w * y[j];
      den += w;
    }
    if (den > 0.0) {
      fit.fitted[i] = num / den;
    } else {
      fit.fitted[i] = nearest_neighbor_value(x, y, x[i], -1);
      ++fit.fallback_count;
    }
    const double den_loo = den - 1.0;  // self weight is exactly K(0) = 1
    if (den_loo > 1e-12) {
      const double m_loo = (num - y[i]) / den_loo;
      cv += (y[i] - m_loo) * (y[i] - m_loo);
    } else {
      const double nn = nearest_neighbor_value(x, y, x[i], i);
      cv += (y[i] - nn) * (y[i] - nn);
    }
  }
  fit.cv_score = cv;
  return fit;
}

double silverman_bandwidth(const Eigen::VectorXd& x) {
  const long n = x.size();
  if (n < 2) throw InvalidInput("silverman_bandwidth: need n >= 2");
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / double(n - 1));
  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * double(n - 1);
    const long lo = static_cast<long>(pos);
    const long hi = std::min<long>(lo + 1, n - 1);
    const double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  const double iqr = (quantile(0.75) - quantile(0.25)) / 1.349;
  double scale = sd;
  if (iqr > 0.0 && iqr < scale) scale = iqr;
  if (!(scale > 0.0)) scale = std::max(std::abs(mean), 1.0);
  return 1.06 * scale * std::pow(double(n), -0.2);
}

NadarayaWatsonEvaluator::NadarayaWatsonEvaluator(const Eigen::VectorXd& x, bool use_binned)
    : binned_(use_binned) {
  const long n = x.size();
  if (n < 2) throw InvalidInput("NadarayaWatsonEvaluator: need n >= 2");
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0L);
  std::sort(order_.begin(), order_.end(), [&](long a, long b) { return x[a] < x[b]; });
  x_sorted_.resize(n);
  for (long k = 0; k < n; ++k) x_sorted_[k] = x[order_[k]];
  range_ = x_sorted_[n - 1] - x_sorted_[0];
}

// numerator/denominator of the unnormalized kernel sums evaluated at every
// sorted sample point (y given in sorted order)
void NadarayaWatsonEvaluator::sums(const Eigen::VectorXd& y, double h, Eigen::VectorXd& num,
                                   Eigen::VectorXd& den) const {
  const long n = x_sorted_.size();
  num.setZero(n);
  den.setZero(n);
  if (!binned_ || range_ <= 0.0) {
    const double cut = k_cutoff * h;
    for (long i = 0; i < n; ++i) {
      num[i] += y[i];  // self weight K(0) = 1
      den[i] += 1.0;
      for (long j = i + 1; j < n && x_sorted_[j] - x_sorted_[i] <= cut; ++j) {
        const double u = (x_sorted_[j] - x_sorted_[i]) / h;
        const double w = std::exp(-0.5 * u * u);
        num[i] += w * y[j];
        den[i] += w;
        num[j] += w * y[i];
        den[j] += w;
      }
    }
    return;
  }

  // linear binning on a grid of step h/4, kernel taps out to 9h
  const double step = h / 4.0;
  const long nbins = static_cast<long>(range_ / step) + 2;
  Eigen::VectorXd bin_y = Eigen::VectorXd::Zero(nbins);
  Eigen::VectorXd bin_c = Eigen::VectorXd::Zero(nbins);
  const double x0 = x_sorted_[0];
  for (long i = 0; i < n; ++i) {
    const double pos = (x_sorted_[i] - x0) / step;
    const long b = std::min<long>(static_cast<long>(pos), nbins - 2);
    const double frac = pos - double(b);
    bin_y[b] += (1.0 - frac) * y[i];
    bin_y[b + 1] += frac * y[i];
    bin_c[b] += 1.0 - frac;
    bin_c[b + 1] += frac;
  }
  const long taps = static_cast<long>(k_cutoff * h / step) + 1;
  Eigen::VectorXd w(taps + 1);
  for (long d = 0; d <= taps; ++d) {
    const double u = double(d) * step / h;
    w[d] = std::exp(-0.5 * u * u);
  }
  Eigen::VectorXd grid_num = Eigen::VectorXd::Zero(nbins);
  Eigen::VectorXd grid_den = Eigen::VectorXd::Zero(nbins);
  for (long g = 0; g < nbins; ++g) {
    const double cy = bin_y[g];
    const double cc = bin_c[g];
    if (cc == 0.0 && cy == 0.0) continue;
    const long dlo = std::max<long>(-taps, -g);
    const long dhi = std::min<long>(taps, nbins - 1 - g);
    for (long d = dlo; d <= dhi; ++d) {
      const double wd = w[d < 0 ? -d : d];
      grid_num[g + d] += wd * cy;
      grid_den[g + d] += wd * cc;
    }
  }
  for (long i = 0; i < n; ++i) {
    const double pos = (x_sorted_[i] - x0) / step;
    const long b = std::min<long>(static_cast<long>(pos), nbins - 2);
    const double frac = pos - double(b);
    num[i] = (1.0 - frac) * grid_num[b] + frac * grid_num[b + 1];
    den[i] = (1.0 - frac) * grid_den[b] + frac * grid_den[b + 1];
  }
}

double NadarayaWatsonEvaluator::loo_cv(const Eigen::VectorXd& y, double h) const {
  const long n = x_sorted_.size();
  if (y.size() != n) throw DimensionMismatch("loo_cv: y length mismatch");
  Eigen::VectorXd ys(n);
  for (long k = 0; k < n; ++k) ys[k] = y[order_[k]];
  Eigen::VectorXd num, den;
  sums(ys, h, num, den);
  const double ymean = ys.mean();

  // self weight as seen through the evaluation pipeline: exactly K(0) = 1 on
  // the exact path; on the binned path the unit's own mass is spread over two
  // bins, smoothed, and interpolated back
  double self_flat = 1.0;
  const bool use_binned = binned_ && range_ > 0.0;
  const double w1 = use_binned ? std::exp(-0.5 / 16.0) : 0.0;  // one grid step = h/4
  double cv = 0.0;
  for (long i = 0; i < n; ++i) {
    double self = self_flat;
    if (use_binned) {
      const double step = h / 4.0;
      const double pos = (x_sorted_[i] - x_sorted_[0]) / step;
      const double f = pos - std::floor(pos);
      const double cross = 2.0 * f * (1.0 - f);
      self = (1.0 - cross) + w1 * cross;
    }
    // den - self cancels catastrophically once the off-self kernel mass is
    // tiny; below the guard the point is effectively isolated at this h
    const double den_loo = den[i] - self;
    double pred;
    if (den_loo > 1e-6) {
      pred = (num[i] - self * ys[i]) / den_loo;
    } else {
      pred = ymean;
    }
    cv += (ys[i] - pred) * (ys[i] - pred);
  }
  return cv;
}

Eigen::VectorXd NadarayaWatsonEvaluator::fitted(const Eigen::VectorXd& y, double h,
                                                int* fallback_count) const {
  const long n = x_sorted_.size();
  if (y.size() != n) throw DimensionMismatch("fitted: y length mismatch");
  Eigen::VectorXd ys(n);
  for (long k = 0; k < n; ++k) ys[k] = y[order_[k]];
  Eigen::VectorXd num, den;
  sums(ys, h, num, den);
  Eigen::VectorXd out(n);
  int fallbacks = 0;
  for (long k = 0; k < n; ++k) {
    double v;
    if (den[k] > 1e-300) {
      v = num[k] / den[k];
    } else {
      v = nearest_neighbor_value(x_sorted_, ys, x_sorted_[k], k);
      ++fallbacks;
    }
    out[order_[k]] = v;
  }
  if (fallback_count) *fallback_count = fallbacks;
  return out;
}

double loo_bandwidth(const NadarayaWatsonEvaluator& eval, double reference_bandwidth,
                     const Eigen::VectorXd& y, const LooBandwidthOptions& opts) {
  const double lo = opts.lo_factor * reference_bandwidth;
  const double hi = opts.hi_factor * reference_bandwidth;
  const int G = opts.grid_points;
  std::vector<double> hs(G), cvs(G);
  const double lr = std::log(hi / lo);
  for (int g = 0; g < G; ++g) {
    hs[g] = lo * std::exp(lr * double(g) / double(G - 1));
    cvs[g] = eval.loo_cv(y, hs[g]);
  }
  const auto mn = std::min_element(cvs.begin(), cvs.end());
  const auto mx = std::max_element(cvs.begin(), cvs.end());
  if (*mx - *mn <= 1e-12 * (1.0 + std::abs(*mx))) {
    return reference_bandwidth;  // flat CV curve
  }
  const int arg = static_cast<int>(mn - cvs.begin());
  double a = hs[std::max(0, arg - 1)];
  double b = hs[std::min(G - 1, arg + 1)];
  // one golden-section refinement pass on log-bandwidth
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double la = std::log(a), lb = std::log(b);
  double lc = lb - invphi * (lb - la);
  double ld = la + invphi * (lb - la);
  double fc = eval.loo_cv(y, std::exp(lc));
  double fd = eval.loo_cv(y, std::exp(ld));
  for (int it = 0; it < 12; ++it) {
    if (fc < fd) {
      lb = ld;
      ld = lc;
      fd = fc;
      lc = lb - invphi * (lb - la);
      fc = eval.loo_cv(y, std::exp(lc));
    } else {
      la = lc;
      lc = ld;
      fc = fd;
      ld = la + invphi * (lb - la);
      fd = eval.loo_cv(y, std::exp(ld));
    }
  }
  const double refined = std::exp((la + lb) / 2.0);
  return eval.loo_cv(y, refined) <= cvs[arg] ? refined : hs[arg];
}

double loo_bandwidth(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     const LooBandwidthOptions& opts) {
  if (x.size() < 3) throw InvalidInput("loo_bandwidth: need n >= 3");
  const bool binned = opts.use_binned_above && x.size() > 600;
  NadarayaWatsonEvaluator eval(x, binned);
  return loo_bandwidth(eval, silverman_bandwidth(x), y, opts);
}

}  // namespace twophase

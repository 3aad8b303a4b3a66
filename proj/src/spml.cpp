#include "twophase/spml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "twophase/errors.hpp"

namespace twophase {

namespace {

constexpr double k_log_2pi = 1.8378770664093454835606594728112;

struct Stratum {
  Eigen::VectorXd support;       // distinct observed x values
  Eigen::VectorXd obs_count;     // multiplicity among complete units
  Eigen::VectorXd y_inc;         // responses of units with x missing
  Eigen::VectorXd q;             // within-stratum point masses
  Eigen::ArrayXXd post;          // |incomplete| x |support| work buffer
  Eigen::VectorXd rowmax, rowsum, colsum;
};

}  // namespace

SpmlFit estimate_spml_gaussian(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                               const std::vector<std::uint8_t>& observed,
                               const std::vector<int>& stratum, const SpmlOptions& opts) {
  const long n = y.size();
  if (x.size() != n || static_cast<long>(observed.size()) != n ||
      static_cast<long>(stratum.size()) != n) {
    throw DimensionMismatch("estimate_spml_gaussian: input length mismatch");
  }

  std::map<int, Stratum> strata;
  std::map<int, long> inc_count;
  for (long i = 0; i < n; ++i) {
    strata[stratum[i]];
    if (!observed[i]) ++inc_count[stratum[i]];
  }
  for (auto& [label, st] : strata) st.y_inc.resize(inc_count[label]);
  {
    std::map<int, long> fill;
    for (long i = 0; i < n; ++i) {
      if (!observed[i]) strata[stratum[i]].y_inc[fill[stratum[i]]++] = y[i];
    }
  }
  for (auto& [label, st] : strata) {
    std::vector<double> vals;
    for (long i = 0; i < n; ++i) {
      if (stratum[i] == label && observed[i]) vals.push_back(x[i]);
    }
    if (vals.empty()) {
      if (st.y_inc.size() > 0) {
        throw EmptySupport("estimate_spml_gaussian: stratum with missing x has no phase-2 x");
      }
      continue;
    }
    std::sort(vals.begin(), vals.end());
    std::vector<double> sup, cnt;
    for (double v : vals) {
      if (sup.empty() || v != sup.back()) {
        sup.push_back(v);
        cnt.push_back(1.0);
      } else {
        cnt.back() += 1.0;
      }
    }
    st.support = Eigen::Map<Eigen::VectorXd>(sup.data(), sup.size());
    st.obs_count = Eigen::Map<Eigen::VectorXd>(cnt.data(), cnt.size());
    st.q = st.obs_count / st.obs_count.sum();
    st.post.resize(st.y_inc.size(), st.support.size());
    st.rowmax.resize(st.y_inc.size());
    st.rowsum.resize(st.y_inc.size());
  }

  // complete-case least squares start
  double sx = 0, sxx = 0, sy = 0, sxy = 0, syy = 0;
  long n_comp = 0;
  for (long i = 0; i < n; ++i) {
    if (!observed[i]) continue;
    sx += x[i];
    sxx += x[i] * x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
    ++n_comp;
  }
  if (n_comp < 3) throw InvalidInput("estimate_spml_gaussian: too few complete units");
  double det = n_comp * sxx - sx * sx;
  if (std::abs(det) < 1e-12 * (std::abs(n_comp * sxx) + 1.0)) {
    throw InvalidInput("estimate_spml_gaussian: degenerate complete-case design");
  }
  SpmlFit fit;
  fit.theta[1] = (n_comp * sxy - sx * sy) / det;
  fit.theta[0] = (sy - fit.theta[1] * sx) / n_comp;
  fit.sigma2 = std::max(
      1e-12,
      (syy - 2 * fit.theta[0] * sy - 2 * fit.theta[1] * sxy + n_comp * fit.theta[0] * fit.theta[0] +
       2 * fit.theta[0] * fit.theta[1] * sx + fit.theta[1] * fit.theta[1] * sxx) /
          n_comp);

  // constant complete-data pieces of the weighted least squares M-step
  const double c_Sw = double(n_comp), c_Swx = sx, c_Swxx = sxx, c_Swy = sy, c_Swxy = sxy,
               c_Swyy = syy;

  double ll_prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    const double a = fit.theta[0];
    const double b = fit.theta[1];
    const double s2 = fit.sigma2;

    double ll = 0.0;
    {
      // complete units: residual part in accumulated form
      const double rss = c_Swyy - 2 * a * c_Swy - 2 * b * c_Swxy + c_Sw * a * a +
                         2 * a * b * c_Swx + b * b * c_Swxx;
      ll += -0.5 * double(n_comp) * (k_log_2pi + std::log(s2)) - 0.5 * rss / s2;
    }
    double Sw = c_Sw, Swx = c_Swx, Swxx = c_Swxx, Swy = c_Swy, Swxy = c_Swxy, Swyy = c_Swyy;

    for (auto& [label, st] : strata) {
      const long m = st.support.size();
      if (m > 0) ll += (st.obs_count.array() * st.q.array().log()).sum();
      const long ni = st.y_inc.size();
      if (ni == 0) continue;

      const Eigen::ArrayXd mu = a + b * st.support.array();
      const Eigen::ArrayXd shift = st.q.array().log() - 0.5 * mu.square() / s2;
      const Eigen::ArrayXd slope = mu / s2;
      // log w_ij = shift_j + y_i * slope_j - y_i^2/(2 s2); the last term is
      // constant per row and handled through the normalizing constant.
      // column-blocked passes keep the big matrix traffic to a minimum
      st.rowmax.setConstant(ni, -std::numeric_limits<double>::infinity());
      for (long j = 0; j < m; ++j) {
        st.post.col(j) = shift[j] + slope[j] * st.y_inc.array();
        st.rowmax = st.rowmax.array().max(st.post.col(j));
      }
      st.rowsum.setZero(ni);
      for (long j = 0; j < m; ++j) {
        st.post.col(j) = (st.post.col(j) - st.rowmax.array()).exp();
        st.rowsum += st.post.col(j).matrix();
      }
      ll += (st.rowmax.array() + st.rowsum.array().log() -
             0.5 * (k_log_2pi + std::log(s2)) - 0.5 * st.y_inc.array().square() / s2)
                .sum();
      Eigen::VectorXd colsum(m), wy(m);
      const Eigen::ArrayXd inv_rowsum = st.rowsum.array().inverse();
      for (long j = 0; j < m; ++j) {
        st.post.col(j) *= inv_rowsum;
        colsum[j] = st.post.col(j).sum();
        wy[j] = (st.post.col(j) * st.y_inc.array()).sum();
      }
      st.colsum = colsum;
      Sw += double(ni);
      Swx += colsum.dot(st.support);
      Swxx += (colsum.array() * st.support.array().square()).sum();
      Swy += st.y_inc.sum();
      Swxy += wy.dot(st.support);
      Swyy += st.y_inc.squaredNorm();
    }

    fit.iterations = it + 1;
    if (ll < ll_prev - 1e-8 * (1.0 + std::abs(ll_prev))) {
      throw NonConvergence("estimate_spml_gaussian: log-likelihood decreased");
    }
    if (it > 0 && ll - ll_prev < opts.tol) {
      fit.converged = true;
      fit.loglik = ll;
      break;
    }
    ll_prev = ll;
    fit.loglik = ll;

    det = Sw * Swxx - Swx * Swx;
    if (std::abs(det) < 1e-14 * std::max(1.0, Sw * Swxx)) {
      throw NonConvergence("estimate_spml_gaussian: degenerate M-step");
    }
    const double b_new = (Sw * Swxy - Swx * Swy) / det;
    const double a_new = (Swy - b_new * Swx) / Sw;
    const double rss = Swyy - 2 * a_new * Swy - 2 * b_new * Swxy + Sw * a_new * a_new +
                       2 * a_new * b_new * Swx + b_new * b_new * Swxx;
    fit.theta[0] = a_new;
    fit.theta[1] = b_new;
    fit.sigma2 = std::max(rss / Sw, 1e-12);
    for (auto& [label, st] : strata) {
      if (st.support.size() == 0) continue;
      Eigen::VectorXd mass = st.obs_count;
      if (st.y_inc.size() > 0) mass += st.colsum;
      st.q = mass / mass.sum();
    }
  }
  if (!fit.converged) {
    throw NonConvergence("estimate_spml_gaussian: EM hit the iteration cap");
  }
  return fit;
}

}  // namespace twophase

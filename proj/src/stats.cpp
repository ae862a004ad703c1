#include "cqreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cqreg {

double std_normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  return 0.5 * std::erfc(-x * inv_sqrt2);
}

namespace {

// Acklam's rational approximation, |relative error| < 1.15e-9
double normal_quantile_approx(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_quantile: p must lie in (0,1)");
  double x = normal_quantile_approx(p);
  // one Halley step on Phi(x) - p
  double e = std_normal_cdf(x) - p;
  double u = e / std_normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

RescaledEcdf::RescaledEcdf(const std::vector<double>& sample,
                           const std::vector<bool>& keep) {
  if (sample.size() != keep.size())
    throw std::invalid_argument("rescaled_ecdf: sample/keep length mismatch");
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (keep[i]) sorted_.push_back(sample[i]);
  if (sorted_.empty())
    throw std::invalid_argument("rescaled_ecdf: no kept observations");
  std::sort(sorted_.begin(), sorted_.end());
}

double RescaledEcdf::operator()(double t) const {
  const auto count =
      std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
  return static_cast<double>(count) / (static_cast<double>(sorted_.size()) + 1.0);
}

Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& columns) {
  const Eigen::Index n = columns.rows();
  if (n == 0) throw std::invalid_argument("pseudo_observations: empty sample");
  Eigen::MatrixXd out(n, columns.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return columns(a, j) < columns(b, j);
    });
    // average ranks within tied runs
    Eigen::Index i = 0;
    while (i < n) {
      Eigen::Index k = i;
      while (k + 1 < n && columns(order[k + 1], j) == columns(order[i], j)) ++k;
      const double avg_rank = 0.5 * static_cast<double>(i + k) + 1.0;
      for (Eigen::Index t = i; t <= k; ++t)
        out(order[t], j) = avg_rank / (static_cast<double>(n) + 1.0);
      i = k + 1;
    }
  }
  return out;
}

namespace {

// number of tied pairs, sum over runs of equal values of t*(t-1)/2
double tied_pairs(const std::vector<double>& v) {
  double total = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t k = i;
    while (k + 1 < v.size() && v[k + 1] == v[i]) ++k;
    const double t = static_cast<double>(k - i + 1);
    total += 0.5 * t * (t - 1.0);
    i = k + 1;
  }
  return total;
}

// merge sort counting swaps (used for the discordant-pair count)
double merge_count(std::vector<double>& v, std::vector<double>& buf,
                   std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0.0;
  const std::size_t mid = lo + (hi - lo) / 2;
  double swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<double>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double kendall_tau(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const auto n = static_cast<std::size_t>(u.size());
  if (u.size() != v.size())
    throw std::invalid_argument("kendall_tau: length mismatch");
  if (n < 2) throw std::invalid_argument("kendall_tau: need at least 2 points");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (u[static_cast<Eigen::Index>(a)] != u[static_cast<Eigen::Index>(b)])
      return u[static_cast<Eigen::Index>(a)] < u[static_cast<Eigen::Index>(b)];
    return v[static_cast<Eigen::Index>(a)] < v[static_cast<Eigen::Index>(b)];
  });

  std::vector<double> us(n), vs(n);
  for (std::size_t i = 0; i < n; ++i) {
    us[i] = u[static_cast<Eigen::Index>(idx[i])];
    vs[i] = v[static_cast<Eigen::Index>(idx[i])];
  }

  // pairs tied in u, and tied in both u and v
  const double n1 = tied_pairs(us);
  double n3 = 0.0;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t k = i;
      while (k + 1 < n && us[k + 1] == us[i] && vs[k + 1] == vs[i]) ++k;
      const double t = static_cast<double>(k - i + 1);
      n3 += 0.5 * t * (t - 1.0);
      i = k + 1;
    }
  }

  std::vector<double> work = vs, buf(n);
  const double discordant = merge_count(work, buf, 0, n);

  const double n2 = tied_pairs(work);  // work is v sorted ascending now
  const double n0 = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
  const double num = n0 - n1 - n2 + n3 - 2.0 * discordant;
  const double den = std::sqrt((n0 - n1) * (n0 - n2));
  if (den == 0.0)
    throw std::invalid_argument("kendall_tau: a column is constant");
  return num / den;
}

double weighted_quantile(const std::vector<WeightedPoint>& points, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("weighted_quantile: tau must lie in (0,1)");
  if (points.empty())
    throw std::invalid_argument("weighted_quantile: empty point set");
  std::vector<WeightedPoint> sorted = points;
  for (const auto& p : sorted)
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight))
      throw std::invalid_argument("weighted_quantile: weights must be finite and >= 0");
  std::sort(sorted.begin(), sorted.end(),
            [](const WeightedPoint& a, const WeightedPoint& b) {
              return a.value < b.value;
            });
  double total = 0.0;
  for (const auto& p : sorted) total += p.weight;
  if (total <= 0.0)
    throw std::invalid_argument("weighted_quantile: total weight is zero");

  const double target = tau * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i].weight;
    const bool last_of_run =
        (i + 1 == sorted.size()) || (sorted[i + 1].value != sorted[i].value);
    if (last_of_run && cum >= target) return sorted[i].value;
  }
  return sorted.back().value;
}

double weighted_quantile(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                         double tau) {
  if (values.size() != weights.size())
    throw std::invalid_argument("weighted_quantile: values/weights length mismatch");
  std::vector<WeightedPoint> pts(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i)
    pts[static_cast<std::size_t>(i)] = {values[i], weights[i]};
  return weighted_quantile(pts, tau);
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - std::floor(h);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace cqreg

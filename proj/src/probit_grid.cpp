#include "cqreg/probit_grid.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cqreg/paircop.hpp"
#include "cqreg/rng.hpp"
#include "cqreg/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cqreg {

namespace {

// psi basis: 1, w1, w2, w1^2, w1*w2, w2^2
constexpr int kBasis = 6;
constexpr int kPow1[kBasis] = {0, 1, 0, 2, 1, 0};
constexpr int kPow2[kBasis] = {0, 0, 1, 0, 1, 2};

// moments E[W1^p W2^q], p+q <= 4, of a bivariate normal via Stein's identity
void gauss_moments(double mu1, double mu2, double s11, double s12, double s22,
                   double m[5][5]) {
  m[0][0] = 1.0;
  for (int t = 1; t <= 4; ++t) {
    for (int p = t; p >= 0; --p) {
      const int q = t - p;
      if (p >= 1) {
        double val = mu1 * m[p - 1][q];
        if (p >= 2) val += (p - 1) * s11 * m[p - 2][q];
        if (q >= 1) val += q * s12 * m[p - 1][q - 1];
        m[p][q] = val;
      } else {
        double val = mu2 * m[0][q - 1];
        if (q >= 2) val += (q - 1) * s22 * m[0][q - 2];
        m[p][q] = val;
      }
    }
  }
}

struct NodeResult {
  double value;
  bool fallback;
  bool empty;
};

// Newton maximization of the local likelihood at one node. `s` holds the
// per-observation kernel-weighted data moments in psi order.
NodeResult solve_node(const double s[kBasis], double h, int max_iter, double tol) {
  const double f0 = s[0];
  if (f0 < 1e-14) return {f0, false, true};

  Eigen::Matrix<double, kBasis, 1> a = Eigen::Matrix<double, kBasis, 1>::Zero();
  a[0] = std::log(f0);
  const double inv_h2 = 1.0 / (h * h);

  auto build = [&](const Eigen::Matrix<double, kBasis, 1>& coef, double& mass0,
                   double m[5][5]) -> bool {
    const double a11 = inv_h2 - 2.0 * coef[3];
    const double a22 = inv_h2 - 2.0 * coef[5];
    const double a12 = -coef[4];
    const double det = a11 * a22 - a12 * a12;
    if (!(a11 > 1e-10) || !(det > 1e-14)) return false;
    const double s11 = a22 / det, s22 = a11 / det, s12 = -a12 / det;
    const double mu1 = s11 * coef[1] + s12 * coef[2];
    const double mu2 = s12 * coef[1] + s22 * coef[2];
    const double quad = 0.5 * (coef[1] * mu1 + coef[2] * mu2);
    mass0 = std::exp(coef[0] + quad) / (h * h * std::sqrt(det));
    if (!std::isfinite(mass0) || mass0 > 1e12) return false;
    gauss_moments(mu1, mu2, s11, s12, s22, m);
    return true;
  };

  double mass0;
  double mom[5][5];
  if (!build(a, mass0, mom)) return {f0, true, false};
  double objective = 0.0;
  for (int i = 0; i < kBasis; ++i) objective += s[i] * a[i];
  objective -= mass0;

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::Matrix<double, kBasis, 1> grad;
    for (int i = 0; i < kBasis; ++i)
      grad[i] = s[i] - mass0 * mom[kPow1[i]][kPow2[i]];
    if (grad.cwiseAbs().maxCoeff() < tol) return {std::exp(a[0]), false, false};

    Eigen::Matrix<double, kBasis, kBasis> hess;
    for (int i = 0; i < kBasis; ++i)
      for (int j = 0; j < kBasis; ++j)
        hess(i, j) = mass0 * mom[kPow1[i] + kPow1[j]][kPow2[i] + kPow2[j]];
    hess.diagonal().array() += 1e-10 * (1.0 + hess.trace());

    Eigen::Matrix<double, kBasis, 1> step = hess.ldlt().solve(grad);
    if (!step.allFinite()) return {f0, true, false};

    // damped update: require an admissible quadratic part and no decrease
    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 20; ++halving) {
      Eigen::Matrix<double, kBasis, 1> cand = a + scale * step;
      double cand_mass;
      double cand_mom[5][5];
      if (build(cand, cand_mass, cand_mom)) {
        double cand_obj = 0.0;
        for (int i = 0; i < kBasis; ++i) cand_obj += s[i] * cand[i];
        cand_obj -= cand_mass;
        if (cand_obj >= objective - 1e-12) {
          a = cand;
          mass0 = cand_mass;
          std::copy(&cand_mom[0][0], &cand_mom[0][0] + 25, &mom[0][0]);
          objective = cand_obj;
          accepted = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!accepted) return {f0, true, false};
  }
  return {f0, true, false};
}

// kernel factor matrices along one axis: out_p(i,a) = phi(d/h)/h * d^p
void axis_factors(const Eigen::VectorXd& z, const Eigen::VectorXd& nodes, double h,
                  Eigen::MatrixXd& k0, Eigen::MatrixXd& k1, Eigen::MatrixXd& k2,
                  bool parallel) {
  const Eigen::Index n = z.size();
  const Eigen::Index m = nodes.size();
  k0.resize(n, m);
  k1.resize(n, m);
  k2.resize(n, m);
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index a = 0; a < m; ++a) {
      const double d = z[i] - nodes[a];
      const double k = std_normal_pdf(d / h) / h;
      k0(i, a) = k;
      k1(i, a) = k * d;
      k2(i, a) = k * d * d;
    }
  }
}

double trapezoid_weight(int i, int m, double step) {
  return (i == 0 || i == m - 1) ? 0.5 * step : step;
}

DensityGrid fit_grid_at_bandwidth(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2,
                                  double h, const SmootherConfig& config) {
  const int m = config.grid_m;
  const Eigen::Index n = z1.size();
  DensityGrid grid;
  grid.m = m;
  grid.z_max = config.z_max;
  grid.bandwidth = h;
  grid.values.resize(m, m);

  Eigen::VectorXd nodes(m);
  for (int i = 0; i < m; ++i)
    nodes[i] = -config.z_max + 2.0 * config.z_max * i / (m - 1.0);

  Eigen::MatrixXd x0, x1, x2, y0, y1, y2;
  axis_factors(z1, nodes, h, x0, x1, x2, config.parallel);
  axis_factors(z2, nodes, h, y0, y1, y2, config.parallel);

  // per-observation kernel moments in psi order, m x m each; the six
  // products are independent and each one is computed whole by one thread
  std::array<Eigen::MatrixXd, kBasis> s;
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::array<std::pair<const Eigen::MatrixXd*, const Eigen::MatrixXd*>, kBasis>
      factors = {{{&x0, &y0}, {&x1, &y0}, {&x0, &y1}, {&x2, &y0}, {&x1, &y1}, {&x0, &y2}}};
#pragma omp parallel for schedule(dynamic, 1) if (config.parallel)
  for (int k = 0; k < kBasis; ++k)
    s[static_cast<std::size_t>(k)] =
        (factors[static_cast<std::size_t>(k)].first->transpose() *
         *factors[static_cast<std::size_t>(k)].second) *
        inv_n;

  int fallbacks = 0, empties = 0;
  const int total = m * m;

  auto run_node = [&](int idx) -> NodeResult {
    const int a = idx / m, b = idx % m;
    double sv[kBasis];
    for (int k = 0; k < kBasis; ++k) sv[k] = s[static_cast<std::size_t>(k)](a, b);
    return solve_node(sv, h, config.newton_max_iter, config.newton_tol);
  };

  if (config.parallel) {
#pragma omp parallel for schedule(static) reduction(+ : fallbacks, empties)
    for (int idx = 0; idx < total; ++idx) {
      const NodeResult r = run_node(idx);
      grid.values(idx / m, idx % m) = r.value;
      fallbacks += r.fallback ? 1 : 0;
      empties += r.empty ? 1 : 0;
    }
  } else {
    for (int idx = 0; idx < total; ++idx) {
      const NodeResult r = run_node(idx);
      grid.values(idx / m, idx % m) = r.value;
      fallbacks += r.fallback ? 1 : 0;
      empties += r.empty ? 1 : 0;
    }
  }
  grid.fallback_nodes = fallbacks;
  grid.empty_nodes = empties;

  // exact mass of the bilinear surface with clamped-edge extension; the
  // copula back-transform turns each outside strip into T times the edge line
  const double step = 2.0 * config.z_max / (m - 1.0);
  const double tail =
      (1.0 - std_normal_cdf(config.z_max)) / std_normal_pdf(config.z_max);
  double interior = 0.0, edges = 0.0, corners = 0.0;
  for (int i = 0; i < m; ++i) {
    const double wi = trapezoid_weight(i, m, step);
    for (int j = 0; j < m; ++j)
      interior += wi * trapezoid_weight(j, m, step) * grid.values(i, j);
    edges += wi * (grid.values(i, 0) + grid.values(i, m - 1) +
                   grid.values(0, i) + grid.values(m - 1, i));
  }
  corners = grid.values(0, 0) + grid.values(0, m - 1) + grid.values(m - 1, 0) +
            grid.values(m - 1, m - 1);
  const double mass = interior + tail * edges + tail * tail * corners;
  if (!(mass > 0.0))
    throw std::runtime_error("fit_probit_ll: estimated density has zero mass");
  grid.normalization = 1.0 / mass;
  build_panel_cache(grid);
  return grid;
}

Eigen::VectorXd to_probit(const Eigen::VectorXd& u) {
  Eigen::VectorXd z(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    z[i] = std_normal_quantile(std::min(std::max(u[i], kEpsU), 1.0 - kEpsU));
  return z;
}

double bilinear(const DensityGrid& grid, double z1, double z2) {
  const double step = 2.0 * grid.z_max / (grid.m - 1.0);
  const double t1 = (z1 + grid.z_max) / step;
  const double t2 = (z2 + grid.z_max) / step;
  const int i = std::min(std::max(static_cast<int>(std::floor(t1)), 0), grid.m - 2);
  const int j = std::min(std::max(static_cast<int>(std::floor(t2)), 0), grid.m - 2);
  const double f1 = t1 - i, f2 = t2 - j;
  return (1.0 - f1) * (1.0 - f2) * grid.values(i, j) +
         f1 * (1.0 - f2) * grid.values(i + 1, j) +
         (1.0 - f1) * f2 * grid.values(i, j + 1) + f1 * f2 * grid.values(i + 1, j + 1);
}

constexpr int kPanel = kHfuncPanel;

const std::array<double, kPanel>& panel_probits() {
  static const std::array<double, kPanel> z = [] {
    std::array<double, kPanel> out{};
    for (int k = 0; k < kPanel; ++k) {
      const double s = static_cast<double>(k) / (kPanel - 1);
      out[static_cast<std::size_t>(k)] =
          std_normal_quantile(std::min(std::max(s, kEpsU), 1.0 - kEpsU));
    }
    return out;
  }();
  return z;
}

// direct 401-point integration, used when the panel cache is absent
double conditional_cdf_direct(const DensityGrid& grid, double upper, double given,
                              bool given_is_first) {
  const auto& zs = panel_probits();
  const double zg = std::min(std::max(std_normal_quantile(std::min(
                                 std::max(given, kEpsU), 1.0 - kEpsU)),
                             -grid.z_max),
                             grid.z_max);
  const double den_g = std_normal_pdf(zg);

  std::array<double, kPanel> c{};
  for (int k = 0; k < kPanel; ++k) {
    const double zk =
        std::min(std::max(zs[static_cast<std::size_t>(k)], -grid.z_max), grid.z_max);
    const double num = given_is_first ? bilinear(grid, zg, zk) : bilinear(grid, zk, zg);
    c[static_cast<std::size_t>(k)] =
        grid.normalization * num / (den_g * std_normal_pdf(zk));
  }
  const double ds = 1.0 / (kPanel - 1);
  std::array<double, kPanel> cum{};
  for (int k = 1; k < kPanel; ++k)
    cum[static_cast<std::size_t>(k)] = cum[static_cast<std::size_t>(k - 1)] +
                                       0.5 * (c[static_cast<std::size_t>(k - 1)] +
                                              c[static_cast<std::size_t>(k)]) *
                                           ds;
  const double total = cum[kPanel - 1];
  if (!(total > 0.0)) return upper;

  const double pos = upper * (kPanel - 1);
  const int k = std::min(static_cast<int>(std::floor(pos)), kPanel - 2);
  const double frac = pos - k;
  const double c_upper = c[static_cast<std::size_t>(k)] +
                         frac * (c[static_cast<std::size_t>(k + 1)] -
                                 c[static_cast<std::size_t>(k)]);
  const double partial = cum[static_cast<std::size_t>(k)] +
                         0.5 * (c[static_cast<std::size_t>(k)] + c_upper) * frac * ds;
  return std::min(std::max(partial / total, 0.0), 1.0);
}

double conditional_cdf(const DensityGrid& grid, double upper, double given,
                       bool given_is_first) {
  if (upper <= 0.0) return 0.0;
  if (upper >= 1.0) return 1.0;
  if (!grid.panel_ready)
    return conditional_cdf_direct(grid, upper, given, given_is_first);

  const double zg = std::min(std::max(std_normal_quantile(std::min(
                                 std::max(given, kEpsU), 1.0 - kEpsU)),
                             -grid.z_max),
                             grid.z_max);
  const double step = 2.0 * grid.z_max / (grid.m - 1.0);
  const double t = (zg + grid.z_max) / step;
  const int i = std::min(std::max(static_cast<int>(std::floor(t)), 0), grid.m - 2);
  const double f = t - i;

  const Eigen::MatrixXd& panel = given_is_first ? grid.panel_rows : grid.panel_cols;
  const Eigen::MatrixXd& cum =
      given_is_first ? grid.panel_rows_cum : grid.panel_cols_cum;
  // the common factor normalization / phi(zg) cancels in the ratio
  const double total = (1.0 - f) * cum(i, kPanel - 1) + f * cum(i + 1, kPanel - 1);
  if (!(total > 0.0)) return upper;

  const double pos = upper * (kPanel - 1);
  const int k = std::min(static_cast<int>(std::floor(pos)), kPanel - 2);
  const double frac = pos - k;
  const double ds = 1.0 / (kPanel - 1);
  const double c_k = (1.0 - f) * panel(i, k) + f * panel(i + 1, k);
  const double c_k1 = (1.0 - f) * panel(i, k + 1) + f * panel(i + 1, k + 1);
  const double c_upper = c_k + frac * (c_k1 - c_k);
  const double cum_k = (1.0 - f) * cum(i, k) + f * cum(i + 1, k);
  const double partial = cum_k + 0.5 * (c_k + c_upper) * frac * ds;
  return std::min(std::max(partial / total, 0.0), 1.0);
}

}  // namespace

void build_panel_cache(DensityGrid& grid) {
  const auto& zs = panel_probits();
  const int m = grid.m;
  const double step = 2.0 * grid.z_max / (m - 1.0);
  const double ds = 1.0 / (kPanel - 1);
  grid.panel_rows.resize(m, kPanel);
  grid.panel_cols.resize(m, kPanel);
  for (int k = 0; k < kPanel; ++k) {
    const double zk =
        std::min(std::max(zs[static_cast<std::size_t>(k)], -grid.z_max), grid.z_max);
    const double pdf_k = std_normal_pdf(zk);
    const double t = (zk + grid.z_max) / step;
    const int j = std::min(std::max(static_cast<int>(std::floor(t)), 0), m - 2);
    const double f = t - j;
    for (int i = 0; i < m; ++i) {
      grid.panel_rows(i, k) =
          ((1.0 - f) * grid.values(i, j) + f * grid.values(i, j + 1)) / pdf_k;
      grid.panel_cols(i, k) =
          ((1.0 - f) * grid.values(j, i) + f * grid.values(j + 1, i)) / pdf_k;
    }
  }
  grid.panel_rows_cum.resize(m, kPanel);
  grid.panel_cols_cum.resize(m, kPanel);
  grid.panel_rows_cum.col(0).setZero();
  grid.panel_cols_cum.col(0).setZero();
  for (int k = 1; k < kPanel; ++k) {
    grid.panel_rows_cum.col(k) =
        grid.panel_rows_cum.col(k - 1) +
        0.5 * ds * (grid.panel_rows.col(k - 1) + grid.panel_rows.col(k));
    grid.panel_cols_cum.col(k) =
        grid.panel_cols_cum.col(k - 1) +
        0.5 * ds * (grid.panel_cols.col(k - 1) + grid.panel_cols.col(k));
  }
  grid.panel_ready = true;
}

double bandwidth_from_fraction(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                               double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("bandwidth_from_fraction: alpha must lie in (0,1]");
  Eigen::VectorXd z1 = to_probit(u), z2 = to_probit(v);
  const Eigen::Index n = z1.size();

  // cap the pairwise computation on very large samples (strided subsample)
  const Eigen::Index cap = 2000;
  const Eigen::Index stride = n > cap ? (n + cap - 1) / cap : 1;
  std::vector<double> pts1, pts2;
  for (Eigen::Index i = 0; i < n; i += stride) {
    pts1.push_back(z1[i]);
    pts2.push_back(z2[i]);
  }
  const std::size_t k = pts1.size();
  if (k < 2) throw std::invalid_argument("bandwidth_from_fraction: n < 2");
  std::vector<double> dist2(k * (k - 1) / 2);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t w = i * (k - 1) - i * (i - 1) / 2;
    for (std::size_t j = i + 1; j < k; ++j) {
      const double dx = pts1[i] - pts1[j], dy = pts2[i] - pts2[j];
      dist2[w++] = dx * dx + dy * dy;
    }
  }

  // type-7 quantile via selection on squared distances (sqrt is monotone, so
  // order statistics carry over)
  const double pos = (static_cast<double>(dist2.size()) - 1.0) * alpha;
  const auto lo_idx = static_cast<std::ptrdiff_t>(std::floor(pos));
  const auto hi_idx = std::min<std::ptrdiff_t>(
      lo_idx + 1, static_cast<std::ptrdiff_t>(dist2.size()) - 1);
  std::nth_element(dist2.begin(), dist2.begin() + lo_idx, dist2.end());
  const double q_lo = std::sqrt(dist2[static_cast<std::size_t>(lo_idx)]);
  std::nth_element(dist2.begin() + lo_idx, dist2.begin() + hi_idx, dist2.end());
  const double q_hi = std::sqrt(dist2[static_cast<std::size_t>(hi_idx)]);
  const double q = q_lo + (pos - std::floor(pos)) * (q_hi - q_lo);

  const double h = q * std::pow(static_cast<double>(n), -1.0 / 6.0);
  return std::max(h, 1e-3);
}

double select_bandwidth(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                        const SmootherConfig& config) {
  if (config.fractions.empty())
    throw std::invalid_argument("select_bandwidth: empty fraction list");
  if (u.size() < 20)
    throw std::invalid_argument("select_bandwidth: need at least 20 observations");
  if (config.fractions.size() == 1)
    return bandwidth_from_fraction(u, v, config.fractions.front());

  const Eigen::Index n = u.size();
  std::vector<double> bandwidths;
  for (double alpha : config.fractions)
    bandwidths.push_back(bandwidth_from_fraction(u, v, alpha));

  // seeded fold assignment
  std::vector<int> fold(static_cast<std::size_t>(n));
  {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(derive_seed(config.cv_seed, 0xf01d5));
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t pos = 0; pos < idx.size(); ++pos)
      fold[static_cast<std::size_t>(idx[pos])] =
          static_cast<int>(pos % static_cast<std::size_t>(config.cv_folds));
  }

  Eigen::VectorXd z1 = to_probit(u), z2 = to_probit(v);
  double best_ll = -std::numeric_limits<double>::infinity();
  double best_h = bandwidths.front();
  for (std::size_t a = 0; a < bandwidths.size(); ++a) {
    double total_ll = 0.0;
    for (int f = 0; f < config.cv_folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (Eigen::Index i = 0; i < n; ++i)
        (fold[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      if (train.size() < 20 || test.empty()) continue;
      Eigen::VectorXd tz1(static_cast<Eigen::Index>(train.size()));
      Eigen::VectorXd tz2(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        tz1[static_cast<Eigen::Index>(i)] = z1[train[i]];
        tz2[static_cast<Eigen::Index>(i)] = z2[train[i]];
      }
      const DensityGrid g = fit_grid_at_bandwidth(tz1, tz2, bandwidths[a], config);
      for (Eigen::Index i : test)
        total_ll += std::log(std::max(grid_copula_density(g, u[i], v[i]), 1e-12));
    }
    if (total_ll > best_ll) {
      best_ll = total_ll;
      best_h = bandwidths[a];
    }
  }
  return best_h;
}

DensityGrid fit_probit_ll(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                          const SmootherConfig& config) {
  if (u.size() != v.size())
    throw std::invalid_argument("fit_probit_ll: length mismatch");
  if (u.size() < 20)
    throw std::invalid_argument("fit_probit_ll: need at least 20 observations");
  double h;
  if (config.fixed_bandwidth > 0.0)
    h = config.fixed_bandwidth;
  else if (config.nn_fraction > 0.0)
    h = bandwidth_from_fraction(u, v, config.nn_fraction);
  else
    h = select_bandwidth(u, v, config);
  return fit_grid_at_bandwidth(to_probit(u), to_probit(v), h, config);
}

double grid_copula_density(const DensityGrid& grid, double u, double v) {
  u = std::min(std::max(u, kEpsU), 1.0 - kEpsU);
  v = std::min(std::max(v, kEpsU), 1.0 - kEpsU);
  const double z1 =
      std::min(std::max(std_normal_quantile(u), -grid.z_max), grid.z_max);
  const double z2 =
      std::min(std::max(std_normal_quantile(v), -grid.z_max), grid.z_max);
  return grid.normalization * bilinear(grid, z1, z2) /
         (std_normal_pdf(z1) * std_normal_pdf(z2));
}

double grid_hfunc(const DensityGrid& grid, double upper, double given_u0) {
  return conditional_cdf(grid, upper, given_u0, true);
}

double grid_hfunc_1given2(const DensityGrid& grid, double upper, double given_v) {
  return conditional_cdf(grid, upper, given_v, false);
}

void save_density_grid(const DensityGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_density_grid: cannot open " + path);
  out.precision(17);
  out << "cqreg-density-grid 1\n";
  out << grid.m << " " << grid.z_max << " " << grid.bandwidth << " "
      << grid.normalization << " " << grid.fallback_nodes << " " << grid.empty_nodes
      << "\n";
  for (int i = 0; i < grid.m; ++i) {
    for (int j = 0; j < grid.m; ++j) out << grid.values(i, j) << (j + 1 < grid.m ? " " : "\n");
  }
}

DensityGrid load_density_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_density_grid: cannot open " + path);
  std::string magic;
  int version;
  in >> magic >> version;
  if (magic != "cqreg-density-grid" || version != 1)
    throw std::runtime_error("load_density_grid: unrecognized format in " + path);
  DensityGrid grid;
  in >> grid.m >> grid.z_max >> grid.bandwidth >> grid.normalization >>
      grid.fallback_nodes >> grid.empty_nodes;
  if (!in || grid.m < 2)
    throw std::runtime_error("load_density_grid: corrupt header in " + path);
  grid.values.resize(grid.m, grid.m);
  for (int i = 0; i < grid.m; ++i)
    for (int j = 0; j < grid.m; ++j) in >> grid.values(i, j);
  if (!in) throw std::runtime_error("load_density_grid: corrupt payload in " + path);
  build_panel_cache(grid);
  return grid;
}

}  // namespace cqreg

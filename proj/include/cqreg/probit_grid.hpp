#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace cqreg {

struct SmootherConfig {
  int grid_m = 64;              // nodes per axis
  double z_max = 3.2;           // grid extent in probit space
  double fixed_bandwidth = -1;  // absolute bandwidth override (used by refits)
  double nn_fraction = -1;      // fixed nearest-neighbor fraction; <= 0 selects by CV
  std::vector<double> fractions = {0.3, 0.45, 0.6, 0.8, 1.0};
  int cv_folds = 5;
  std::uint64_t cv_seed = 1;
  int newton_max_iter = 25;
  double newton_tol = 1e-6;
  bool parallel = true;
};

// fixed panel resolution of the conditional-CDF integrals
inline constexpr int kHfuncPanel = 401;

// Bivariate density of probit-transformed pseudo-observations, tabulated on
// an m x m grid over [-z_max, z_max]^2. Values hold exp of the fitted local
// quadratic intercept; back-transformation and normalization turn the table
// into a copula density on (0,1)^2.
struct DensityGrid {
  int m = 0;
  double z_max = 0.0;
  double bandwidth = 0.0;
  double normalization = 1.0;
  Eigen::MatrixXd values;  // (i,j) = node (z1_i, z2_j)

  int fallback_nodes = 0;  // nodes where Newton fell back to the kernel value
  int empty_nodes = 0;     // nodes with no local data mass

  // per-row/column copula densities on the fixed integration panel and their
  // cumulative trapezoids; built by the fitter (h-function calls are O(1)
  // lookups instead of 401-point integrals)
  bool panel_ready = false;
  Eigen::MatrixXd panel_rows, panel_rows_cum;  // m x kHfuncPanel
  Eigen::MatrixXd panel_cols, panel_cols_cum;

  double node(int i) const {
    return -z_max + 2.0 * z_max * static_cast<double>(i) /
                        (static_cast<double>(m) - 1.0);
  }
};

// builds the integration-panel cache; fit_probit_ll and load_density_grid do
// this automatically
void build_panel_cache(DensityGrid& grid);

// Local log-quadratic likelihood fit in probit space with a Gaussian product
// kernel. Throws std::invalid_argument for n < 20.
DensityGrid fit_probit_ll(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                          const SmootherConfig& config = {});

// bandwidth implied by one nearest-neighbor fraction: the alpha-quantile of
// pairwise probit-space distances, scaled by n^(-1/6)
double bandwidth_from_fraction(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                               double alpha);

// cross-validated selection over config.fractions; deterministic given
// config.cv_seed. Returns the selected bandwidth.
double select_bandwidth(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                        const SmootherConfig& config = {});

// back-transformed copula density; evaluation points beyond the grid extent
// are clamped to the edge
double grid_copula_density(const DensityGrid& grid, double u, double v);

// conditional CDF of the second argument given the first, computed as a
// row-normalized trapezoid integral on a 401-point panel
double grid_hfunc(const DensityGrid& grid, double upper, double given_u0);

// conditional CDF of the first argument given the second
double grid_hfunc_1given2(const DensityGrid& grid, double upper, double given_v);

void save_density_grid(const DensityGrid& grid, const std::string& path);
DensityGrid load_density_grid(const std::string& path);

}  // namespace cqreg

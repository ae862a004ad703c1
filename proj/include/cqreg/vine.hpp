#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cqreg/paircop.hpp"
#include "cqreg/probit_grid.hpp"

namespace cqreg {

enum class CopulaMode { SP, P, NP };

std::string mode_name(CopulaMode mode);
CopulaMode parse_mode(const std::string& text);

// one bivariate building block, either a parametric family or a density grid
struct PairCopulaModel {
  enum class Kind { parametric, grid };
  Kind kind = Kind::parametric;
  ParametricPair par;
  DensityGrid grid;

  static PairCopulaModel parametric(ParametricPair p);
  static PairCopulaModel nonparametric(DensityGrid g);

  double density(double u, double v) const;
  // conditional CDF of the first argument given the second
  double h_1given2(double u, double given_v) const;
  // conditional CDF of the second argument given the first
  double h_2given1(double v, double given_u) const;
};

struct VineEdge {
  int var_a = -1;              // conditioned pair, in fit order
  int var_b = -1;
  std::vector<int> cond;       // sorted conditioning set
  PairCopulaModel model;
};

// nested trees of a regular vine; level k holds (n_vars - 1 - k) edges
struct VineStructure {
  int n_vars = 0;
  std::vector<std::vector<VineEdge>> levels;

  bool empty() const { return n_vars == 0; }
  double density(const Eigen::VectorXd& point) const;
};

// Two-part model: d nonparametric (or parametric, in P mode) pairs for the
// response-covariate dependence, and a simplified vine for the conditional
// covariate dependence. In P mode a single jointly selected vine is kept
// instead.
struct VineCopulaModel {
  int d = 0;
  CopulaMode mode = CopulaMode::SP;
  std::vector<PairCopulaModel> interest;  // c_{Y,Xj}, j = 1..d (SP/NP)
  VineStructure noisy;                    // vine over conditional pseudo-obs
  VineStructure joint;                    // P mode only
};

struct VineConfig {
  CopulaMode mode = CopulaMode::SP;
  std::vector<PairFamily> candidates = default_candidate_families();
  SmootherConfig smoother;
};

// conditional pseudo-observations F_{j|Y}(x_j | y) for the noisy part
Eigen::VectorXd conditional_pseudo(const Eigen::VectorXd& pseudo_u0,
                                   const Eigen::VectorXd& pseudo_xj,
                                   const PairCopulaModel& interest_pair);

// Fits the copula model on pseudo-observations (columns in (0,1)).
// Tree structures are selected by maximum spanning trees on |Kendall tau|.
VineCopulaModel fit_vine(const Eigen::VectorXd& pseudo_u0,
                         const Eigen::MatrixXd& pseudo_x, const VineConfig& config);

// copula density c(u0, u) of the fitted model
double eval_copula_density(const VineCopulaModel& model, double u0,
                           const Eigen::VectorXd& u);

// JSON description of the fitted structure (families, parameters, grid
// metadata) for reproducibility dumps
std::string describe_vine(const VineCopulaModel& model);

}  // namespace cqreg

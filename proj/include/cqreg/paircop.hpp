#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace cqreg {

enum class FamilyTag { independence, gaussian, clayton, gumbel, frank, joe };

// rotation in degrees: the density mass is rotated by reflecting arguments,
// 90: (u,v) -> (v, 1-u), 180: (1-u, 1-v), 270: (1-v, u)
struct PairFamily {
  FamilyTag tag = FamilyTag::independence;
  int rotation = 0;
};

struct ParametricPair {
  PairFamily family;
  double theta = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  bool at_boundary = false;
};

// copula arguments are clamped into [kEpsU, 1 - kEpsU] before evaluation
inline constexpr double kEpsU = 1e-10;

double pair_density(const ParametricPair& pair, double u, double v);

// h(u | v) = dC/dv, the conditional CDF of the first argument
double pair_hfunc(const ParametricPair& pair, double u, double given_v);

// conditional CDF of the second argument, dC/du
double pair_hfunc_2given1(const ParametricPair& pair, double v, double given_u);

struct ThetaInterval {
  double lo;
  double hi;
};
ThetaInterval admissible_interval(FamilyTag tag);

std::string family_name(const PairFamily& family);
PairFamily parse_family(const std::string& text);  // e.g. "clayton90", "gaussian"

// maximum-likelihood fit of a one-parameter family on pseudo-observations
ParametricPair fit_pair_ml(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                           PairFamily family);

// fit every candidate and keep the smallest AIC (ties: first in list)
ParametricPair select_pair_aic(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                               const std::vector<PairFamily>& candidates);

std::vector<PairFamily> default_candidate_families();

}  // namespace cqreg

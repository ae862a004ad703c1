#pragma once

#include <Eigen/Core>
#include <vector>

namespace cqreg {

double std_normal_pdf(double x);

// standard normal CDF, accurate to ~1e-15; total on [-inf, inf]
double std_normal_cdf(double x);

// inverse of std_normal_cdf on (0,1); throws std::domain_error at 0/1
double std_normal_quantile(double p);

// Rescaled empirical distribution over the kept subsample:
// F(t) = #{kept values <= t} / (n_kept + 1), right-continuous.
class RescaledEcdf {
public:
  RescaledEcdf() = default;
  RescaledEcdf(const std::vector<double>& sample, const std::vector<bool>& keep);

  double operator()(double t) const;
  int n_kept() const { return static_cast<int>(sorted_.size()); }

private:
  std::vector<double> sorted_;
};

// Column-wise ranks divided by n+1, ties broken by average rank.
Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& columns);

// Kendall's tau-b (tie corrected), O(n log n).
double kendall_tau(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct WeightedPoint {
  double value;
  double weight;
};

// Smallest value v in the point set with sum{w_i : value_i <= v} >= tau * W.
// Equals the left-continuous argmin of the weighted check loss over the
// observed values.
double weighted_quantile(const std::vector<WeightedPoint>& points, double tau);
double weighted_quantile(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                         double tau);

// check loss rho_tau(u) = u * (tau - 1(u < 0))
inline double check_loss(double u, double tau) {
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

// type-7 sample quantile (linear interpolation of order statistics)
double sample_quantile(std::vector<double> values, double p);

}  // namespace cqreg

#pragma once

#include <Eigen/Core>
#include <vector>

namespace cqreg {

// observed right-censored data: y = min(T, C), delta = 1(T <= C)
struct ObservedSample {
  Eigen::VectorXd y;
  std::vector<int> delta;
  Eigen::MatrixXd x;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index d() const { return x.cols(); }
  int n_events() const;
  void validate() const;
};

// Right-continuous step estimate of the censoring CDF G_C. Starts at 0,
// nondecreasing; the value is extended beyond the last jump.
class StepSurvival {
public:
  StepSurvival() = default;
  StepSurvival(std::vector<double> jump_times, std::vector<double> values);

  double cdf(double t) const;
  // left limit G_C(t-); 0 before (and at) the first jump
  double cdf_left(double t) const;

  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

private:
  std::vector<double> times_;
  std::vector<double> values_;
};

enum class CensoringKind { none, km, cox };
enum class CoxBaseline { exponential, breslow };

struct CensoringModel {
  CensoringKind kind = CensoringKind::none;
  StepSurvival km;                    // kind == km
  Eigen::VectorXd cox_beta;           // kind == cox
  CoxBaseline cox_baseline = CoxBaseline::exponential;
  double cox_baseline_rate = 0.0;     // exponential-baseline hazard rate
  StepSurvival cox_cum_hazard;        // breslow cumulative baseline hazard
  double cox_grad_norm = 0.0;         // diagnostics of the Newton fit
  int cox_iterations = 0;

  // G_C(t|x) and its left limit
  double cdf(double t, const Eigen::VectorXd& x) const;
  double cdf_left(double t, const Eigen::VectorXd& x) const;
};

// Product-limit estimator of the censoring distribution: censoring events
// (delta = 0) play the role of the events of interest.
StepSurvival kaplan_meier_censoring(const ObservedSample& sample);

struct CoxFitOptions {
  CoxBaseline baseline = CoxBaseline::exponential;
  int max_iter = 50;
  double grad_tol = 1e-8;
  double ridge = 1e-8;
};

// Cox partial likelihood with event/censoring roles swapped; Breslow tie
// handling. Throws if there is no censoring event or Newton fails.
CensoringModel fit_cox_censoring(const ObservedSample& sample,
                                 const CoxFitOptions& options = {});

struct WeightDiagnostics {
  int clamped = 0;
};

// The weight floor: 1 - G_C is clamped below at this value so weights stay
// bounded by 1/kWeightFloor.
inline constexpr double kWeightFloor = 1e-3;

// W_i = delta_i / (1 - G_C(Y_i- | x)); zero on censored rows. Clamped
// survival probabilities are counted in `diag` when provided, otherwise a
// warning goes to stderr.
Eigen::VectorXd censoring_weights(const ObservedSample& sample,
                                  const CensoringModel& model,
                                  const Eigen::VectorXd& x,
                                  WeightDiagnostics* diag = nullptr);

}  // namespace cqreg

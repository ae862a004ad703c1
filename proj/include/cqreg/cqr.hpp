#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "cqreg/stats.hpp"
#include "cqreg/survival.hpp"
#include "cqreg/vine.hpp"

namespace cqreg {

struct FitConfig {
  VineConfig vine;
  CensoringKind censoring = CensoringKind::none;
  CoxBaseline cox_baseline = CoxBaseline::exponential;
};

// Fitted conditional-quantile estimator: marginals and the copula are built
// on event rows only, the censoring model on the full sample.
struct QuantileEstimator {
  VineCopulaModel vine;
  CensoringModel censoring;
  RescaledEcdf marginal_y;
  std::vector<RescaledEcdf> marginal_x;
  ObservedSample training;
  std::vector<Eigen::Index> event_rows;
  Eigen::VectorXd event_y;   // observed times on event rows
  Eigen::VectorXd event_u0;  // marginal_y evaluated at event_y

  int n_events() const { return static_cast<int>(event_rows.size()); }
};

struct QuantileCurve {
  std::vector<double> taus;
  std::vector<double> values;  // nondecreasing by construction
};

QuantileEstimator fit_estimator(const ObservedSample& sample, const FitConfig& config);

// per-event-row weights W_i(x) * c(F_Y(Y_i), F(x)); shared by all tau levels
Eigen::VectorXd prediction_weights(const QuantileEstimator& estimator,
                                   const Eigen::VectorXd& x,
                                   WeightDiagnostics* diag = nullptr);

double predict(const QuantileEstimator& estimator, const Eigen::VectorXd& x,
               double tau);

// one weight vector reused across all tau levels, so the curve is
// nondecreasing without any post-hoc adjustment
QuantileCurve predict_curve(const QuantileEstimator& estimator,
                            const Eigen::VectorXd& x, const std::vector<double>& taus);

// Refit with the structure frozen from `frozen`: same trees, same selected
// families, same bandwidths; parameters and grids re-estimated on the data.
VineCopulaModel refit_vine(const Eigen::VectorXd& pseudo_u0,
                           const Eigen::MatrixXd& pseudo_x,
                           const VineCopulaModel& frozen, const VineConfig& config);

// a predictor factory: builds x -> m_hat(x) from a training sample
using PredictorFactory = std::function<std::function<double(const Eigen::VectorXd&)>(
    const ObservedSample&)>;

// median over event rows i of rho_tau(Y_i - m^{-i}(X_i)), leave-one-out
double cv_prediction_error_with(const ObservedSample& sample, double tau,
                                const PredictorFactory& factory,
                                bool parallel = true);

// Leave-one-out prediction error of the copula estimator. Bandwidths and
// structure are selected once on the full sample and reused across folds;
// marginals, grids, thetas and the censoring model are refitted per fold.
double cv_prediction_error(const ObservedSample& sample, double tau,
                           const FitConfig& config, bool parallel = true);

}  // namespace cqreg

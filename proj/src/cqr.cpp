#include "cqreg/cqr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cqreg {

namespace {

ObservedSample drop_row(const ObservedSample& sample, Eigen::Index row) {
  const Eigen::Index n = sample.n();
  ObservedSample out;
  out.y.resize(n - 1);
  out.delta.resize(static_cast<std::size_t>(n - 1));
  out.x.resize(n - 1, sample.d());
  Eigen::Index w = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == row) continue;
    out.y[w] = sample.y[i];
    out.delta[static_cast<std::size_t>(w)] = sample.delta[static_cast<std::size_t>(i)];
    out.x.row(w) = sample.x.row(i);
    ++w;
  }
  return out;
}

QuantileEstimator fit_with(const ObservedSample& sample, const FitConfig& config,
                           const VineCopulaModel* frozen) {
  sample.validate();
  QuantileEstimator est;
  est.training = sample;

  std::vector<bool> keep(static_cast<std::size_t>(sample.n()));
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    keep[static_cast<std::size_t>(i)] = sample.delta[static_cast<std::size_t>(i)] != 0;
    if (keep[static_cast<std::size_t>(i)]) est.event_rows.push_back(i);
  }
  const auto n_events = static_cast<Eigen::Index>(est.event_rows.size());
  if (n_events < 30) {
    std::ostringstream msg;
    msg << "fit_estimator: too few event rows (" << n_events << " < 30)";
    throw std::runtime_error(msg.str());
  }

  std::vector<double> y_all(sample.y.data(), sample.y.data() + sample.n());
  est.marginal_y = RescaledEcdf(y_all, keep);
  est.marginal_x.reserve(static_cast<std::size_t>(sample.d()));
  for (Eigen::Index j = 0; j < sample.d(); ++j) {
    std::vector<double> col(sample.x.col(j).data(), sample.x.col(j).data() + sample.n());
    est.marginal_x.emplace_back(col, keep);
  }

  // pseudo-observations restricted to event rows
  Eigen::MatrixXd event_cols(n_events, sample.d() + 1);
  est.event_y.resize(n_events);
  for (Eigen::Index k = 0; k < n_events; ++k) {
    const Eigen::Index row = est.event_rows[static_cast<std::size_t>(k)];
    event_cols(k, 0) = sample.y[row];
    event_cols.row(k).tail(sample.d()) = sample.x.row(row);
    est.event_y[k] = sample.y[row];
  }
  const Eigen::MatrixXd pseudo = pseudo_observations(event_cols);
  const Eigen::VectorXd pseudo_u0 = pseudo.col(0);
  const Eigen::MatrixXd pseudo_x = pseudo.rightCols(sample.d());

  est.vine = frozen ? refit_vine(pseudo_u0, pseudo_x, *frozen, config.vine)
                    : fit_vine(pseudo_u0, pseudo_x, config.vine);

  switch (config.censoring) {
    case CensoringKind::none:
      est.censoring.kind = CensoringKind::none;
      break;
    case CensoringKind::km:
      est.censoring.kind = CensoringKind::km;
      est.censoring.km = kaplan_meier_censoring(sample);
      break;
    case CensoringKind::cox: {
      CoxFitOptions opts;
      opts.baseline = config.cox_baseline;
      est.censoring = fit_cox_censoring(sample, opts);
      break;
    }
  }

  est.event_u0.resize(n_events);
  for (Eigen::Index k = 0; k < n_events; ++k)
    est.event_u0[k] = est.marginal_y(est.event_y[k]);
  return est;
}

}  // namespace

QuantileEstimator fit_estimator(const ObservedSample& sample, const FitConfig& config) {
  return fit_with(sample, config, nullptr);
}

Eigen::VectorXd prediction_weights(const QuantileEstimator& estimator,
                                   const Eigen::VectorXd& x, WeightDiagnostics* diag) {
  if (x.size() != estimator.training.d())
    throw std::invalid_argument("prediction_weights: covariate dimension mismatch");
  const double nu = static_cast<double>(estimator.n_events());
  const double lo = 1.0 / (nu + 1.0);
  const double hi = nu / (nu + 1.0);
  Eigen::VectorXd ux(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j)
    ux[j] = std::min(std::max(estimator.marginal_x[static_cast<std::size_t>(j)](x[j]), lo), hi);

  const Eigen::VectorXd w_full =
      censoring_weights(estimator.training, estimator.censoring, x, diag);
  const auto n_events = static_cast<Eigen::Index>(estimator.event_rows.size());
  Eigen::VectorXd weights(n_events);
  for (Eigen::Index k = 0; k < n_events; ++k) {
    const Eigen::Index row = estimator.event_rows[static_cast<std::size_t>(k)];
    weights[k] =
        w_full[row] * eval_copula_density(estimator.vine, estimator.event_u0[k], ux);
  }
  return weights;
}

double predict(const QuantileEstimator& estimator, const Eigen::VectorXd& x,
               double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("predict: tau must lie in (0,1)");
  const Eigen::VectorXd weights = prediction_weights(estimator, x);
  if (!(weights.sum() > 0.0)) {
    std::ostringstream msg;
    msg << "predict: all weights vanish at x = [" << x.transpose() << "]";
    throw std::runtime_error(msg.str());
  }
  return weighted_quantile(estimator.event_y, weights, tau);
}

QuantileCurve predict_curve(const QuantileEstimator& estimator,
                            const Eigen::VectorXd& x, const std::vector<double>& taus) {
  for (std::size_t t = 0; t < taus.size(); ++t) {
    if (!(taus[t] > 0.0 && taus[t] < 1.0))
      throw std::invalid_argument("predict_curve: tau must lie in (0,1)");
    if (t > 0 && taus[t] < taus[t - 1])
      throw std::invalid_argument("predict_curve: taus must be sorted");
  }
  const Eigen::VectorXd weights = prediction_weights(estimator, x);
  if (!(weights.sum() > 0.0)) {
    std::ostringstream msg;
    msg << "predict_curve: all weights vanish at x = [" << x.transpose() << "]";
    throw std::runtime_error(msg.str());
  }
  QuantileCurve curve;
  curve.taus = taus;
  curve.values.reserve(taus.size());
  for (double tau : taus)
    curve.values.push_back(weighted_quantile(estimator.event_y, weights, tau));
  return curve;
}

namespace {

PairCopulaModel refit_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                           const PairCopulaModel& frozen, const VineConfig& config) {
  if (frozen.kind == PairCopulaModel::Kind::parametric) {
    if (frozen.par.family.tag == FamilyTag::independence)
      return frozen;  // nothing to re-estimate
    return PairCopulaModel::parametric(fit_pair_ml(a, b, frozen.par.family));
  }
  SmootherConfig smoother = config.smoother;
  smoother.fixed_bandwidth = frozen.grid.bandwidth;
  return PairCopulaModel::nonparametric(fit_probit_ll(a, b, smoother));
}

constexpr double kCondClamp = 1e-10;

double clamp_cond(double x) {
  return std::min(std::max(x, kCondClamp), 1.0 - kCondClamp);
}

// replays a frozen tree structure on new data columns, re-estimating every
// edge model
VineStructure replay_structure(const Eigen::MatrixXd& cols,
                               const VineStructure& frozen,
                               const VineConfig& config) {
  VineStructure out;
  out.n_vars = frozen.n_vars;
  if (frozen.n_vars < 2) return out;
  const Eigen::Index n = cols.rows();
  const auto n_masks = static_cast<std::size_t>(1) << frozen.n_vars;
  std::vector<Eigen::VectorXd> slot(static_cast<std::size_t>(frozen.n_vars) * n_masks);
  auto at = [&](int var, unsigned mask) -> Eigen::VectorXd& {
    return slot[static_cast<std::size_t>(var) * n_masks + mask];
  };
  for (int v = 0; v < frozen.n_vars; ++v) at(v, 0u) = cols.col(v);

  for (const auto& level : frozen.levels) {
    std::vector<VineEdge> edges;
    for (const auto& frozen_edge : level) {
      unsigned mask = 0;
      for (int c : frozen_edge.cond) mask |= (1u << c);
      const Eigen::VectorXd& ca = at(frozen_edge.var_a, mask);
      const Eigen::VectorXd& cb = at(frozen_edge.var_b, mask);
      VineEdge edge;
      edge.var_a = frozen_edge.var_a;
      edge.var_b = frozen_edge.var_b;
      edge.cond = frozen_edge.cond;
      edge.model = refit_pair(ca, cb, frozen_edge.model, config);
      Eigen::VectorXd ha(n), hb(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        ha[i] = clamp_cond(edge.model.h_1given2(ca[i], cb[i]));
        hb[i] = clamp_cond(edge.model.h_2given1(cb[i], ca[i]));
      }
      at(edge.var_a, mask | (1u << edge.var_b)) = std::move(ha);
      at(edge.var_b, mask | (1u << edge.var_a)) = std::move(hb);
      edges.push_back(std::move(edge));
    }
    out.levels.push_back(std::move(edges));
  }
  return out;
}

}  // namespace

VineCopulaModel refit_vine(const Eigen::VectorXd& pseudo_u0,
                           const Eigen::MatrixXd& pseudo_x,
                           const VineCopulaModel& frozen, const VineConfig& config) {
  if (pseudo_x.cols() != frozen.d)
    throw std::invalid_argument("refit_vine: covariate dimension mismatch");
  VineCopulaModel model;
  model.d = frozen.d;
  model.mode = frozen.mode;
  if (frozen.mode == CopulaMode::P) {
    Eigen::MatrixXd cols(pseudo_u0.size(), frozen.d + 1);
    cols.col(0) = pseudo_u0;
    cols.rightCols(frozen.d) = pseudo_x;
    model.joint = replay_structure(cols, frozen.joint, config);
    return model;
  }
  model.interest.reserve(frozen.interest.size());
  for (int j = 0; j < frozen.d; ++j)
    model.interest.push_back(refit_pair(pseudo_u0, pseudo_x.col(j),
                                        frozen.interest[static_cast<std::size_t>(j)],
                                        config));
  if (frozen.d >= 2) {
    Eigen::MatrixXd cond(pseudo_u0.size(), frozen.d);
    for (int j = 0; j < frozen.d; ++j)
      cond.col(j) = conditional_pseudo(pseudo_u0, pseudo_x.col(j),
                                       model.interest[static_cast<std::size_t>(j)]);
    model.noisy = replay_structure(cond, frozen.noisy, config);
  }
  return model;
}

double cv_prediction_error_with(const ObservedSample& sample, double tau,
                                const PredictorFactory& factory, bool parallel) {
  sample.validate();
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("cv_prediction_error: tau must lie in (0,1)");
  std::vector<Eigen::Index> event_rows;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    if (sample.delta[static_cast<std::size_t>(i)] != 0) event_rows.push_back(i);
  if (event_rows.empty())
    throw std::invalid_argument("cv_prediction_error: no event rows");

  const auto n_folds = static_cast<int>(event_rows.size());
  std::vector<double> losses(static_cast<std::size_t>(n_folds), 0.0);
  std::vector<std::string> errors(static_cast<std::size_t>(n_folds));

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int k = 0; k < n_folds; ++k) {
    const Eigen::Index row = event_rows[static_cast<std::size_t>(k)];
    try {
      const ObservedSample reduced = drop_row(sample, row);
      const auto predictor = factory(reduced);
      const double fitted = predictor(sample.x.row(row).transpose());
      losses[static_cast<std::size_t>(k)] = check_loss(sample.y[row] - fitted, tau);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  }
  for (int k = 0; k < n_folds; ++k) {
    if (!errors[static_cast<std::size_t>(k)].empty())
      throw std::runtime_error("cv_prediction_error: fold " + std::to_string(k) +
                               " failed: " + errors[static_cast<std::size_t>(k)]);
  }
  return sample_quantile(losses, 0.5);
}

double cv_prediction_error(const ObservedSample& sample, double tau,
                           const FitConfig& config, bool parallel) {
  // bandwidths and structure come from the full-sample fit; folds refit the
  // numeric content only
  const QuantileEstimator full = fit_estimator(sample, config);
  FitConfig fold_config = config;
  fold_config.vine.smoother.parallel = config.vine.smoother.parallel && !parallel;
  const VineCopulaModel frozen = full.vine;
  const PredictorFactory factory =
      [&fold_config, &frozen, tau](const ObservedSample& reduced) {
        const QuantileEstimator est = fit_with(reduced, fold_config, &frozen);
        return [est, tau](const Eigen::VectorXd& x) { return predict(est, x, tau); };
      };
  return cv_prediction_error_with(sample, tau, factory, parallel);
}

}  // namespace cqreg

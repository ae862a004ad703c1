#include "cqreg/survival.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cqreg {

int ObservedSample::n_events() const {
  int c = 0;
  for (int d : delta) c += (d != 0);
  return c;
}

void ObservedSample::validate() const {
  if (y.size() == 0) throw std::invalid_argument("ObservedSample: empty sample");
  if (static_cast<Eigen::Index>(delta.size()) != y.size() || x.rows() != y.size())
    throw std::invalid_argument("ObservedSample: field lengths disagree");
  if (x.cols() < 1) throw std::invalid_argument("ObservedSample: need d >= 1");
}

StepSurvival::StepSurvival(std::vector<double> jump_times, std::vector<double> values)
    : times_(std::move(jump_times)), values_(std::move(values)) {
  if (times_.size() != values_.size())
    throw std::invalid_argument("StepSurvival: times/values length mismatch");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (times_[i] <= times_[i - 1])
      throw std::invalid_argument("StepSurvival: jump times must be increasing");
    if (values_[i] < values_[i - 1])
      throw std::invalid_argument("StepSurvival: values must be nondecreasing");
  }
}

double StepSurvival::cdf(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepSurvival::cdf_left(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

StepSurvival kaplan_meier_censoring(const ObservedSample& sample) {
  sample.validate();
  const Eigen::Index n = sample.n();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return sample.y[a] < sample.y[b]; });

  std::vector<double> times, values;
  double survival = 1.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = sample.y[order[i]];
    std::size_t k = i;
    int d_cens = 0;
    while (k < order.size() && sample.y[order[k]] == t) {
      d_cens += (sample.delta[static_cast<std::size_t>(order[k])] == 0);
      ++k;
    }
    const double at_risk = static_cast<double>(order.size() - i);
    if (d_cens > 0) {
      survival *= 1.0 - static_cast<double>(d_cens) / at_risk;
      times.push_back(t);
      values.push_back(1.0 - survival);
    }
    i = k;
  }
  return StepSurvival(std::move(times), std::move(values));
}

namespace {

struct PartialLik {
  double loglik;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hessian;  // negative definite part, without ridge
};

// Breslow partial log-likelihood for the censoring process (delta == 0 rows
// are the events), computed with suffix sums over times sorted descending.
PartialLik cox_partial(const ObservedSample& sample,
                       const std::vector<Eigen::Index>& desc,
                       const Eigen::MatrixXd& xc, const Eigen::VectorXd& beta) {
  const Eigen::Index d = xc.cols();
  PartialLik out{0.0, Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);

  std::size_t i = 0;
  while (i < desc.size()) {
    const double t = sample.y[desc[i]];
    // absorb everyone with Y_j == t into the risk set
    std::size_t k = i;
    while (k < desc.size() && sample.y[desc[k]] == t) {
      const Eigen::Index row = desc[k];
      const double eta = xc.row(row).dot(beta);
      const double w = std::exp(eta);
      s0 += w;
      s1 += w * xc.row(row).transpose();
      s2 += w * xc.row(row).transpose() * xc.row(row);
      ++k;
    }
    // Breslow contribution of the tied censoring events at t
    int d_t = 0;
    Eigen::VectorXd x_sum = Eigen::VectorXd::Zero(d);
    double eta_sum = 0.0;
    for (std::size_t j = i; j < k; ++j) {
      const Eigen::Index row = desc[j];
      if (sample.delta[static_cast<std::size_t>(row)] == 0) {
        ++d_t;
        x_sum += xc.row(row).transpose();
        eta_sum += xc.row(row).dot(beta);
      }
    }
    if (d_t > 0) {
      const Eigen::VectorXd mean = s1 / s0;
      out.loglik += eta_sum - d_t * std::log(s0);
      out.grad += x_sum - d_t * mean;
      out.hessian -= d_t * (s2 / s0 - mean * mean.transpose());
    }
    i = k;
  }
  return out;
}

}  // namespace

CensoringModel fit_cox_censoring(const ObservedSample& sample,
                                 const CoxFitOptions& options) {
  sample.validate();
  const Eigen::Index n = sample.n();
  const Eigen::Index d = sample.d();
  int n_cens = 0;
  for (int dl : sample.delta) n_cens += (dl == 0);
  if (n_cens == 0)
    throw std::runtime_error("fit_cox_censoring: no censoring events to fit on");

  // center covariates; the partial likelihood is shift invariant
  const Eigen::RowVectorXd x_mean = sample.x.colwise().mean();
  Eigen::MatrixXd xc = sample.x.rowwise() - x_mean;

  std::vector<Eigen::Index> desc(static_cast<std::size_t>(n));
  std::iota(desc.begin(), desc.end(), Eigen::Index{0});
  std::sort(desc.begin(), desc.end(),
            [&](Eigen::Index a, Eigen::Index b) { return sample.y[a] > sample.y[b]; });

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  PartialLik cur = cox_partial(sample, desc, xc, beta);
  double grad_norm = cur.grad.norm();
  int iter = 0;
  while (grad_norm >= options.grad_tol && iter < options.max_iter) {
    Eigen::MatrixXd a = -cur.hessian;
    a.diagonal().array() += options.ridge;
    Eigen::VectorXd step = a.ldlt().solve(cur.grad);
    // step halving keeps the ascent monotone up to rounding noise
    const double slack = 1e-9 * (1.0 + std::abs(cur.loglik));
    double scale = 1.0;
    PartialLik next = cox_partial(sample, desc, xc, beta + scale * step);
    int halvings = 0;
    while (!(next.loglik >= cur.loglik - slack) && halvings < 30) {
      scale *= 0.5;
      next = cox_partial(sample, desc, xc, beta + scale * step);
      ++halvings;
    }
    beta += scale * step;
    cur = next;
    grad_norm = cur.grad.norm();
    ++iter;
  }
  if (grad_norm >= options.grad_tol) {
    std::ostringstream msg;
    msg << "fit_cox_censoring: Newton did not converge after " << iter
        << " iterations (|grad| = " << grad_norm << ", beta = ["
        << beta.transpose() << "])";
    throw std::runtime_error(msg.str());
  }

  CensoringModel model;
  model.kind = CensoringKind::cox;
  model.cox_beta = beta;
  model.cox_baseline = options.baseline;
  model.cox_grad_norm = grad_norm;
  model.cox_iterations = iter;

  // linear predictors on the original covariate scale
  const double mean_shift = x_mean.dot(beta);
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) eta[i] = sample.x.row(i).dot(beta);

  if (options.baseline == CoxBaseline::exponential) {
    // exponential-baseline hazard MLE given beta
    double denom = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) denom += sample.y[i] * std::exp(eta[i]);
    model.cox_baseline_rate = static_cast<double>(n_cens) / denom;
  } else {
    // Breslow cumulative baseline hazard on the original scale
    std::vector<double> times, cumhaz;
    double s0 = 0.0, h = 0.0;
    std::size_t i = 0;
    std::vector<std::pair<double, int>> jumps;  // (time, d_t) ascending
    while (i < desc.size()) {
      const double t = sample.y[desc[i]];
      std::size_t k = i;
      int d_t = 0;
      while (k < desc.size() && sample.y[desc[k]] == t) {
        s0 += std::exp(eta[desc[k]] - mean_shift);
        d_t += (sample.delta[static_cast<std::size_t>(desc[k])] == 0);
        ++k;
      }
      if (d_t > 0) jumps.push_back({t, d_t});
      if (d_t > 0) cumhaz.push_back(static_cast<double>(d_t) / s0);
      i = k;
    }
    // jumps were collected in descending time order; accumulate ascending
    std::reverse(jumps.begin(), jumps.end());
    std::reverse(cumhaz.begin(), cumhaz.end());
    for (std::size_t j = 0; j < jumps.size(); ++j) {
      h += cumhaz[j];
      times.push_back(jumps[j].first);
      cumhaz[j] = h;
    }
    // undo the centering: hazard exp(beta'x) = exp(beta'xc) * exp(mean_shift)
    for (double& v : cumhaz) v *= std::exp(-mean_shift);
    model.cox_cum_hazard = StepSurvival(std::move(times), std::move(cumhaz));
  }
  return model;
}

double CensoringModel::cdf(double t, const Eigen::VectorXd& x) const {
  switch (kind) {
    case CensoringKind::none:
      return 0.0;
    case CensoringKind::km:
      return km.cdf(t);
    case CensoringKind::cox: {
      const double risk = std::exp(cox_beta.dot(x));
      if (cox_baseline == CoxBaseline::exponential)
        return t <= 0.0 ? 0.0 : 1.0 - std::exp(-t * cox_baseline_rate * risk);
      return 1.0 - std::exp(-cox_cum_hazard.cdf(t) * risk);
    }
  }
  return 0.0;
}

double CensoringModel::cdf_left(double t, const Eigen::VectorXd& x) const {
  switch (kind) {
    case CensoringKind::none:
      return 0.0;
    case CensoringKind::km:
      return km.cdf_left(t);
    case CensoringKind::cox: {
      const double risk = std::exp(cox_beta.dot(x));
      if (cox_baseline == CoxBaseline::exponential)
        return t <= 0.0 ? 0.0 : 1.0 - std::exp(-t * cox_baseline_rate * risk);
      return 1.0 - std::exp(-cox_cum_hazard.cdf_left(t) * risk);
    }
  }
  return 0.0;
}

Eigen::VectorXd censoring_weights(const ObservedSample& sample,
                                  const CensoringModel& model,
                                  const Eigen::VectorXd& x, WeightDiagnostics* diag) {
  sample.validate();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(sample.n());
  int clamped = 0;
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    if (sample.delta[static_cast<std::size_t>(i)] == 0) continue;
    double surv = 1.0 - model.cdf_left(sample.y[i], x);
    if (surv < kWeightFloor) {
      surv = kWeightFloor;
      ++clamped;
    }
    w[i] = 1.0 / surv;
  }
  if (clamped > 0) {
    if (diag != nullptr)
      diag->clamped += clamped;
    else
      std::cerr << "[cqreg] warning: clamped " << clamped
                << " censoring weight(s) at floor " << kWeightFloor << "\n";
  }
  return w;
}

}  // namespace cqreg

#include "cqreg/simlab.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace cqreg {

std::string dgp_name(Dgp tag) {
  switch (tag) {
    case Dgp::A:
      return "A";
    case Dgp::B:
      return "B";
    case Dgp::C:
      return "C";
    case Dgp::D:
      return "D";
    case Dgp::M2:
      return "M2";
    case Dgp::Dette:
      return "DETTE";
  }
  return "A";
}

Dgp parse_dgp(const std::string& text) {
  if (text == "A") return Dgp::A;
  if (text == "B") return Dgp::B;
  if (text == "C") return Dgp::C;
  if (text == "D") return Dgp::D;
  if (text == "M2") return Dgp::M2;
  if (text == "DETTE") return Dgp::Dette;
  throw std::invalid_argument("unknown DGP: " + text);
}

int dgp_dimension(Dgp tag) {
  switch (tag) {
    case Dgp::A:
      return 2;
    case Dgp::B:
      return 3;
    case Dgp::C:
    case Dgp::D:
    case Dgp::M2:
      return 5;
    case Dgp::Dette:
      return 1;
  }
  return 1;
}

namespace {

constexpr double kDetteSigma = 0.025;

// joint correlation of (T, X) for the Gaussian-copula DGPs
Eigen::MatrixXd joint_correlation(Dgp tag) {
  if (tag == Dgp::A) {
    Eigen::MatrixXd r(3, 3);
    r << 1.0, 0.3, 0.9,  //
        0.3, 1.0, 0.5,   //
        0.9, 0.5, 1.0;
    return r;
  }
  Eigen::MatrixXd r(4, 4);
  r << 1.0, 0.3, 0.9, 0.7,  //
      0.3, 1.0, 0.5, 0.25,  //
      0.9, 0.5, 1.0, 0.5,   //
      0.7, 0.25, 0.5, 1.0;
  return r;
}

// covariate correlation for the Cox-model DGPs, entries (rho_12, ..., rho_45)
Eigen::MatrixXd cox_x_correlation() {
  Eigen::MatrixXd r(5, 5);
  r << 1.0, 0.3, 0.4, 0.5, 0.6,  //
      0.3, 1.0, 0.7, 0.3, 0.4,   //
      0.4, 0.7, 1.0, 0.5, 0.6,   //
      0.5, 0.3, 0.5, 1.0, 0.7,   //
      0.6, 0.4, 0.6, 0.7, 1.0;
  return r;
}

Eigen::VectorXd cox_beta() {
  Eigen::VectorXd beta(5);
  beta << 1.0, -0.75, 0.5, 0.25, -0.6;
  return beta;
}

Eigen::MatrixXd x_correlation(Dgp tag) {
  switch (tag) {
    case Dgp::A:
    case Dgp::B: {
      const Eigen::MatrixXd joint = joint_correlation(tag);
      const Eigen::Index d = joint.cols() - 1;
      return joint.bottomRightCorner(d, d);
    }
    case Dgp::C:
    case Dgp::D:
    case Dgp::M2:
      return cox_x_correlation();
    case Dgp::Dette:
      return Eigen::MatrixXd::Identity(1, 1);
  }
  return Eigen::MatrixXd::Identity(1, 1);
}

// regression of the response probit score on the covariate probit scores:
// coefficients and residual standard deviation of Z_0 | Z
void gaussian_truth_coefs(Dgp tag, Eigen::VectorXd& beta, double& resid_sd) {
  const Eigen::MatrixXd joint = joint_correlation(tag);
  const Eigen::Index d = joint.cols() - 1;
  const Eigen::MatrixXd sxx = joint.bottomRightCorner(d, d);
  const Eigen::VectorXd sty = joint.block(1, 0, d, 1);
  beta = sxx.ldlt().solve(sty);
  resid_sd = std::sqrt(1.0 - sty.dot(beta));
}

// uniform-censoring bound for DGPs A and B, exponential rates for C and M2
double censoring_parameter(Dgp tag, double level) {
  if (level == 0.3) {
    switch (tag) {
      case Dgp::A:
      case Dgp::B:
        return 5.0 / 3.0;
      case Dgp::C:
        return 0.464;
      case Dgp::D:
        return 3.0 / 7.0;
      case Dgp::M2:
        return 0.208;
      default:
        break;
    }
  } else if (level == 0.5) {
    switch (tag) {
      case Dgp::A:
      case Dgp::B:
        return 1.0;
      case Dgp::C:
        return 1.083;
      case Dgp::D:
        return 1.0;
      case Dgp::M2:
        return 0.486;
      default:
        break;
    }
  }
  throw std::invalid_argument("unsupported censoring level " + std::to_string(level) +
                              " for DGP " + dgp_name(tag));
}

Eigen::VectorXd m2_transform(const Eigen::VectorXd& x) {
  Eigen::VectorXd out = x;
  out[1] = std::exp(x[1]);
  return out;
}

}  // namespace

Eigen::MatrixXd sample_gaussian_copula(const Eigen::MatrixXd& corr, Eigen::Index n,
                                       Rng& rng) {
  if (corr.rows() != corr.cols())
    throw std::invalid_argument("sample_gaussian_copula: matrix must be square");
  const Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "sample_gaussian_copula: correlation matrix is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();
  const Eigen::Index k = corr.cols();
  Eigen::MatrixXd out(n, k);
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) z[j] = rng.normal();
    const Eigen::VectorXd corr_z = chol * z;
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = std_normal_cdf(corr_z[j]);
  }
  return out;
}

GeneratedData gen_dgp(const DgpSpec& spec, Rng& rng) {
  const int n = spec.n;
  if (n < 0) throw std::invalid_argument("gen_dgp: negative sample size");
  GeneratedData out;
  const bool censored = spec.censoring_level > 0.0;

  switch (spec.tag) {
    case Dgp::A:
    case Dgp::B: {
      const Eigen::MatrixXd u = sample_gaussian_copula(joint_correlation(spec.tag), n, rng);
      const Eigen::Index d = u.cols() - 1;
      out.latent_t = u.col(0);
      out.sample.x = u.rightCols(d);
      out.sample.y.resize(n);
      out.sample.delta.assign(static_cast<std::size_t>(n), 1);
      if (censored) {
        const double m = censoring_parameter(spec.tag, spec.censoring_level);
        for (int i = 0; i < n; ++i) {
          const double c = m * rng.uniform();
          out.sample.y[i] = std::min(out.latent_t[i], c);
          out.sample.delta[static_cast<std::size_t>(i)] = out.latent_t[i] <= c;
        }
      } else {
        out.sample.y = out.latent_t;
      }
      break;
    }
    case Dgp::C:
    case Dgp::D:
    case Dgp::M2: {
      const Eigen::MatrixXd u = sample_gaussian_copula(cox_x_correlation(), n, rng);
      const Eigen::VectorXd beta = cox_beta();
      out.sample.x = u;
      out.sample.y.resize(n);
      out.sample.delta.assign(static_cast<std::size_t>(n), 1);
      out.latent_t.resize(n);
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd xi = u.row(i).transpose();
        const Eigen::VectorXd x_model = spec.tag == Dgp::M2 ? m2_transform(xi) : xi;
        const double event_rate = std::exp(beta.dot(x_model));
        const double t = -std::log(1.0 - rng.uniform()) / event_rate;
        out.latent_t[i] = t;
        double y = t;
        int delta = 1;
        if (censored) {
          double cens_rate;
          if (spec.tag == Dgp::C || spec.tag == Dgp::M2) {
            cens_rate = censoring_parameter(spec.tag, spec.censoring_level);
          } else {
            cens_rate = censoring_parameter(Dgp::D, spec.censoring_level) *
                        std::exp(beta.dot(xi));
          }
          const double c = -std::log(1.0 - rng.uniform()) / cens_rate;
          y = std::min(t, c);
          delta = t <= c;
        }
        out.sample.y[i] = y;
        out.sample.delta[static_cast<std::size_t>(i)] = delta;
      }
      break;
    }
    case Dgp::Dette: {
      if (censored)
        throw std::invalid_argument("gen_dgp: the DETTE spec has no censoring");
      out.sample.x.resize(n, 1);
      out.sample.y.resize(n);
      out.sample.delta.assign(static_cast<std::size_t>(n), 1);
      out.latent_t.resize(n);
      for (int i = 0; i < n; ++i) {
        const double x = rng.uniform();
        const double t = (x - 0.5) * (x - 0.5) + kDetteSigma * rng.normal();
        out.sample.x(i, 0) = x;
        out.sample.y[i] = t;
        out.latent_t[i] = t;
      }
      break;
    }
  }
  return out;
}

Eigen::MatrixXd draw_eval_points(const DgpSpec& spec, Eigen::Index count, Rng& rng) {
  if (spec.tag == Dgp::Dette) {
    Eigen::MatrixXd out(count, 1);
    for (Eigen::Index i = 0; i < count; ++i) out(i, 0) = rng.uniform();
    return out;
  }
  return sample_gaussian_copula(x_correlation(spec.tag), count, rng);
}

double true_quantile(const DgpSpec& spec, const Eigen::VectorXd& x, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("true_quantile: tau must lie in (0,1)");
  switch (spec.tag) {
    case Dgp::A:
    case Dgp::B: {
      Eigen::VectorXd beta;
      double resid_sd;
      gaussian_truth_coefs(spec.tag, beta, resid_sd);
      if (x.size() != beta.size())
        throw std::invalid_argument("true_quantile: covariate dimension mismatch");
      double lin = resid_sd * std_normal_quantile(tau);
      for (Eigen::Index j = 0; j < beta.size(); ++j)
        lin += beta[j] * std_normal_quantile(x[j]);
      return std_normal_cdf(lin);
    }
    case Dgp::C:
    case Dgp::D:
      return -std::log(1.0 - tau) * std::exp(-cox_beta().dot(x));
    case Dgp::M2:
      return -std::log(1.0 - tau) * std::exp(-cox_beta().dot(m2_transform(x)));
    case Dgp::Dette:
      return (x[0] - 0.5) * (x[0] - 0.5) + kDetteSigma * std_normal_quantile(tau);
  }
  throw std::invalid_argument("true_quantile: unsupported spec");
}

double imse(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truths) {
  if (estimates.cols() != truths.size())
    throw std::invalid_argument("imse: dimension mismatch");
  if (estimates.rows() == 0 || estimates.cols() == 0)
    throw std::invalid_argument("imse: empty estimates");
  double total = 0.0;
  for (Eigen::Index p = 0; p < estimates.cols(); ++p) {
    double mse = 0.0;
    for (Eigen::Index b = 0; b < estimates.rows(); ++b) {
      const double e = estimates(b, p) - truths[p];
      mse += e * e;
    }
    total += mse / static_cast<double>(estimates.rows());
  }
  return total / static_cast<double>(estimates.cols());
}

std::pair<double, double> imae_and_dispersion(const Eigen::MatrixXd& estimates,
                                              const Eigen::VectorXd& truths) {
  if (estimates.cols() != truths.size())
    throw std::invalid_argument("imae_and_dispersion: dimension mismatch");
  if (estimates.rows() < 4)
    throw std::invalid_argument("imae_and_dispersion: need at least 4 replications");
  double imae = 0.0, dispersion = 0.0;
  std::vector<double> abs_err(static_cast<std::size_t>(estimates.rows()));
  for (Eigen::Index p = 0; p < estimates.cols(); ++p) {
    for (Eigen::Index b = 0; b < estimates.rows(); ++b)
      abs_err[static_cast<std::size_t>(b)] = std::abs(estimates(b, p) - truths[p]);
    imae += sample_quantile(abs_err, 0.5);
    dispersion += sample_quantile(abs_err, 0.75) - sample_quantile(abs_err, 0.25);
  }
  const double n_points = static_cast<double>(estimates.cols());
  return {imae / n_points, dispersion / n_points};
}

namespace {

// parametric Cox plug-in estimator, kept as a known-form reference column
std::function<double(const Eigen::VectorXd&, double)> fit_reference_cox(
    const ObservedSample& sample) {
  ObservedSample flipped = sample;
  for (auto& d : flipped.delta) d = 1 - d;  // events become the Cox "events"
  const CensoringModel fit = fit_cox_censoring(flipped);
  const Eigen::VectorXd beta = fit.cox_beta;
  double denom = 0.0;
  for (Eigen::Index i = 0; i < sample.n(); ++i)
    denom += sample.y[i] * std::exp(beta.dot(sample.x.row(i).transpose()));
  const double rate = static_cast<double>(sample.n_events()) / denom;
  return [beta, rate](const Eigen::VectorXd& x, double tau) {
    return -std::log(1.0 - tau) * std::exp(-beta.dot(x)) / rate;
  };
}

}  // namespace

double ExperimentResult::imse_of(std::size_t estimator, std::size_t tau_index) const {
  const Eigen::MatrixXd& all = estimates.at(estimator).at(tau_index);
  const int b_incl = included_count();
  Eigen::MatrixXd kept(b_incl, all.cols());
  int row = 0;
  for (Eigen::Index b = 0; b < all.rows(); ++b) {
    if (std::binary_search(excluded_reps.begin(), excluded_reps.end(),
                           static_cast<int>(b)))
      continue;
    kept.row(row++) = all.row(b);
  }
  return imse(kept, truths.at(tau_index));
}

std::pair<double, double> ExperimentResult::imae_of(std::size_t estimator,
                                                    std::size_t tau_index) const {
  const Eigen::MatrixXd& all = estimates.at(estimator).at(tau_index);
  const int b_incl = included_count();
  Eigen::MatrixXd kept(b_incl, all.cols());
  int row = 0;
  for (Eigen::Index b = 0; b < all.rows(); ++b) {
    if (std::binary_search(excluded_reps.begin(), excluded_reps.end(),
                           static_cast<int>(b)))
      continue;
    kept.row(row++) = all.row(b);
  }
  return imae_and_dispersion(kept, truths.at(tau_index));
}

int ExperimentResult::included_count() const {
  return static_cast<int>(estimates.empty() || estimates[0].empty()
                              ? 0
                              : estimates[0][0].rows()) -
         static_cast<int>(excluded_reps.size());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.B < 1) throw std::invalid_argument("run_experiment: B must be >= 1");
  if (config.estimators.empty())
    throw std::invalid_argument("run_experiment: no estimators configured");
  for (double tau : config.taus)
    if (!(tau > 0.0 && tau < 1.0))
      throw std::invalid_argument("run_experiment: tau must lie in (0,1)");

  const std::size_t n_est = config.estimators.size();
  const std::size_t n_tau = config.taus.size();
  const Eigen::Index n_pts = config.eval_points;

  ExperimentResult result;
  {
    Rng eval_rng(derive_seed(config.seed, 0xE7A1u));
    result.eval_x = draw_eval_points(config.dgp, n_pts, eval_rng);
  }
  result.truths.resize(n_tau);
  for (std::size_t t = 0; t < n_tau; ++t) {
    Eigen::VectorXd truth(n_pts);
    for (Eigen::Index p = 0; p < n_pts; ++p)
      truth[p] = true_quantile(config.dgp, result.eval_x.row(p).transpose(),
                               config.taus[t]);
    result.truths[t] = truth;
  }
  result.estimates.assign(
      n_est, std::vector<Eigen::MatrixXd>(
                 n_tau, Eigen::MatrixXd::Constant(
                            config.B, n_pts, std::numeric_limits<double>::quiet_NaN())));

  std::vector<std::vector<ExclusionRecord>> rep_exclusions(
      static_cast<std::size_t>(config.B));
  std::vector<int> rep_clamped(static_cast<std::size_t>(config.B), 0);

#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (int b = 0; b < config.B; ++b) {
    const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(b) + 1);
    Rng rng(rep_seed);
    GeneratedData data;
    try {
      data = gen_dgp(config.dgp, rng);
    } catch (const std::exception& e) {
      rep_exclusions[static_cast<std::size_t>(b)].push_back(
          {b, "(generator)", e.what()});
      continue;
    }
    for (std::size_t e = 0; e < n_est; ++e) {
      const EstimatorSpec& est = config.estimators[e];
      try {
        if (est.reference_cox) {
          const auto predictor = fit_reference_cox(data.sample);
          for (std::size_t t = 0; t < n_tau; ++t)
            for (Eigen::Index p = 0; p < n_pts; ++p)
              result.estimates[e][t](b, p) =
                  predictor(result.eval_x.row(p).transpose(), config.taus[t]);
          continue;
        }
        FitConfig fit_config;
        fit_config.vine.mode = est.mode;
        fit_config.vine.candidates = config.candidates;
        fit_config.vine.smoother = config.smoother;
        fit_config.vine.smoother.cv_seed = derive_seed(rep_seed, 1000 + e);
        fit_config.vine.smoother.parallel =
            config.smoother.parallel && !config.parallel;
        fit_config.censoring = est.censoring;
        fit_config.cox_baseline = est.cox_baseline;
        const QuantileEstimator fitted = fit_estimator(data.sample, fit_config);
        WeightDiagnostics diag;
        for (Eigen::Index p = 0; p < n_pts; ++p) {
          const Eigen::VectorXd x = result.eval_x.row(p).transpose();
          const Eigen::VectorXd weights = prediction_weights(fitted, x, &diag);
          if (!(weights.sum() > 0.0))
            throw std::runtime_error("degenerate prediction weights at point " +
                                     std::to_string(p));
          for (std::size_t t = 0; t < n_tau; ++t)
            result.estimates[e][t](b, p) =
                weighted_quantile(fitted.event_y, weights, config.taus[t]);
        }
        rep_clamped[static_cast<std::size_t>(b)] += diag.clamped;
      } catch (const std::exception& ex) {
        rep_exclusions[static_cast<std::size_t>(b)].push_back({b, est.tag, ex.what()});
      }
    }
  }

  for (int b = 0; b < config.B; ++b) {
    const auto& recs = rep_exclusions[static_cast<std::size_t>(b)];
    if (!recs.empty()) {
      result.excluded_reps.push_back(b);
      result.exclusions.insert(result.exclusions.end(), recs.begin(), recs.end());
    }
    result.clamped_weights += rep_clamped[static_cast<std::size_t>(b)];
  }
  result.valid = static_cast<double>(result.excluded_reps.size()) <=
                 config.max_exclusion_fraction * static_cast<double>(config.B);
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace cqreg

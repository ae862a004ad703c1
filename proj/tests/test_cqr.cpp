#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "cqreg/cqr.hpp"
#include "cqreg/rng.hpp"
#include "cqreg/simlab.hpp"

using namespace cqreg;

namespace {

FitConfig fast_config(CopulaMode mode, CensoringKind censoring) {
  FitConfig config;
  config.vine.mode = mode;
  config.vine.smoother.nn_fraction = 0.6;
  config.censoring = censoring;
  return config;
}

GeneratedData make_dgp(Dgp tag, int n, double censoring, std::uint64_t seed) {
  DgpSpec spec{tag, n, censoring};
  Rng rng(seed);
  return gen_dgp(spec, rng);
}

// brute-force minimizer of the weighted check loss over the event values
double brute_force_predict(const QuantileEstimator& est, const Eigen::VectorXd& x,
                           double tau) {
  const Eigen::VectorXd w = prediction_weights(est, x);
  double best_val = 0, best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> candidates(est.event_y.data(),
                                 est.event_y.data() + est.event_y.size());
  std::sort(candidates.begin(), candidates.end());
  for (double a : candidates) {
    double loss = 0;
    for (Eigen::Index i = 0; i < est.event_y.size(); ++i)
      loss += w[i] * check_loss(est.event_y[i] - a, tau);
    if (loss < best_loss) {
      best_loss = loss;
      best_val = a;
    }
  }
  return best_val;
}

}  // namespace

TEST_CASE("complete-data path and censored path coincide when delta is all ones") {
  const GeneratedData data = make_dgp(Dgp::A, 200, 0.0, 101);
  const QuantileEstimator none =
      fit_estimator(data.sample, fast_config(CopulaMode::SP, CensoringKind::none));
  const QuantileEstimator km =
      fit_estimator(data.sample, fast_config(CopulaMode::SP, CensoringKind::km));
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd x(2);
    x << rng.uniform(), rng.uniform();
    for (double tau : {0.1, 0.3, 0.5, 0.9})
      CHECK(predict(none, x, tau) == predict(km, x, tau));
  }
}

TEST_CASE("structural facts of a fitted SP estimator") {
  const GeneratedData data = make_dgp(Dgp::A, 400, 0.0, 7);
  const QuantileEstimator est =
      fit_estimator(data.sample, fast_config(CopulaMode::SP, CensoringKind::none));
  CHECK(est.vine.interest.size() == 2);
  CHECK(est.n_events() == 400);

  const GeneratedData censored = make_dgp(Dgp::A, 400, 0.5, 7);
  const QuantileEstimator est2 =
      fit_estimator(censored.sample, fast_config(CopulaMode::SP, CensoringKind::km));
  CHECK(est2.n_events() == censored.sample.n_events());
  CHECK(est2.n_events() < 300);  // roughly half the rows are censored
  CHECK(est2.n_events() > 100);
}

TEST_CASE("too few events is a fit error") {
  GeneratedData data = make_dgp(Dgp::A, 40, 0.0, 3);
  for (int i = 0; i < 20; ++i) data.sample.delta[static_cast<std::size_t>(i)] = 0;
  CHECK_THROWS_AS(
      fit_estimator(data.sample, fast_config(CopulaMode::P, CensoringKind::km)),
      std::runtime_error);
}

TEST_CASE("independence copula gives plain sample quantiles") {
  const GeneratedData data = make_dgp(Dgp::A, 150, 0.0, 11);
  FitConfig config = fast_config(CopulaMode::P, CensoringKind::none);
  config.vine.candidates = {{FamilyTag::independence, 0}};
  const QuantileEstimator est = fit_estimator(data.sample, config);
  Eigen::VectorXd x(2);
  x << 0.3, 0.8;
  for (double tau : {0.1, 0.25, 0.5, 0.77}) {
    // the smallest order statistic with ecdf >= tau
    std::vector<double> ys(data.sample.y.data(), data.sample.y.data() + 150);
    std::sort(ys.begin(), ys.end());
    const auto idx = static_cast<std::size_t>(std::ceil(tau * 150.0)) - 1;
    CHECK(predict(est, x, tau) == ys[idx]);
  }
}

TEST_CASE("predict approaches the closed-form truth on DGP A") {
  const GeneratedData data = make_dgp(Dgp::A, 2000, 0.0, 20240815);
  FitConfig config;  // default smoother with bandwidth cross-validation
  config.vine.mode = CopulaMode::SP;
  config.censoring = CensoringKind::none;
  const QuantileEstimator est = fit_estimator(data.sample, config);
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  const double truth = std_normal_cdf(0.4 * std_normal_quantile(0.3));
  CHECK(truth == doctest::Approx(0.4169).epsilon(1e-3));
  CHECK(std::abs(predict(est, x, 0.3) - truth) < 0.08);
}

TEST_CASE("quantile curves are nondecreasing by construction") {
  const std::vector<double> taus = {0.1, 0.3, 0.5, 0.7, 0.9};
  Rng seed_rng(31);
  for (int rep = 0; rep < 6; ++rep) {
    const double censoring = rep % 2 == 0 ? 0.0 : 0.3;
    const Dgp tag = rep < 3 ? Dgp::A : Dgp::C;
    const GeneratedData data =
        make_dgp(tag, 150, censoring, 500 + static_cast<std::uint64_t>(rep));
    const CopulaMode mode = rep % 3 == 0   ? CopulaMode::SP
                            : rep % 3 == 1 ? CopulaMode::P
                                           : CopulaMode::NP;
    const QuantileEstimator est =
        fit_estimator(data.sample, fast_config(mode, CensoringKind::km));
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd x(data.sample.d());
      for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = seed_rng.uniform();
      const QuantileCurve curve = predict_curve(est, x, taus);
      for (std::size_t t = 1; t < curve.values.size(); ++t)
        CHECK(curve.values[t] >= curve.values[t - 1]);
      // same values as pointwise predictions
      for (std::size_t t = 0; t < taus.size(); ++t)
        CHECK(curve.values[t] == predict(est, x, taus[t]));
    }
  }
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  const GeneratedData data = make_dgp(Dgp::A, 150, 0.0, 1);
  const QuantileEstimator est =
      fit_estimator(data.sample, fast_config(CopulaMode::P, CensoringKind::none));
  CHECK_THROWS_AS(predict_curve(est, x, {0.5, 0.3}), std::invalid_argument);
}

TEST_CASE("predict equals the brute-force argmin on small samples") {
  Rng seed_rng(61);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 35 + static_cast<int>(seed_rng.next_u64() % 16);
    const double censoring = rep % 2 == 0 ? 0.0 : 0.3;
    const GeneratedData data =
        make_dgp(Dgp::A, n, censoring, 7000 + static_cast<std::uint64_t>(rep));
    if (data.sample.n_events() < 30) continue;
    const QuantileEstimator est = fit_estimator(
        data.sample,
        fast_config(CopulaMode::P,
                    censoring > 0 ? CensoringKind::km : CensoringKind::none));
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXd x(2);
      x << seed_rng.uniform(), seed_rng.uniform();
      const double tau = 0.1 + 0.8 * seed_rng.uniform();
      CHECK(predict(est, x, tau) == brute_force_predict(est, x, tau));
    }
  }
}

TEST_CASE("cox-censoring estimator runs end to end on DGP D") {
  const GeneratedData data = make_dgp(Dgp::D, 300, 0.3, 99);
  FitConfig config = fast_config(CopulaMode::SP, CensoringKind::cox);
  const QuantileEstimator est = fit_estimator(data.sample, config);
  Eigen::VectorXd x(5);
  x << 0.5, 0.5, 0.5, 0.5, 0.5;
  const double m = predict(est, x, 0.5);
  CHECK(std::isfinite(m));
  CHECK(m > 0.0);
  // weights depend on x through the cox model
  Eigen::VectorXd x2 = x;
  x2[0] = 0.9;
  const Eigen::VectorXd w1 = prediction_weights(est, x);
  const Eigen::VectorXd w2 = prediction_weights(est, x2);
  CHECK(w1 != w2);
}

TEST_CASE("covariate-scale invariance in the KM mode") {
  const GeneratedData data = make_dgp(Dgp::A, 200, 0.3, 13);
  ObservedSample transformed = data.sample;
  for (Eigen::Index i = 0; i < transformed.n(); ++i) {
    transformed.x(i, 0) = std::exp(3.0 * data.sample.x(i, 0));
    transformed.x(i, 1) = std::atan(data.sample.x(i, 1)) * 10.0;
  }
  const FitConfig config = fast_config(CopulaMode::SP, CensoringKind::km);
  const QuantileEstimator est1 = fit_estimator(data.sample, config);
  const QuantileEstimator est2 = fit_estimator(transformed, config);
  Rng rng(2);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd x1(2), x2(2);
    x1 << rng.uniform(), rng.uniform();
    x2 << std::exp(3.0 * x1[0]), std::atan(x1[1]) * 10.0;
    for (double tau : {0.2, 0.5, 0.8})
      CHECK(predict(est1, x1, tau) == predict(est2, x2, tau));
  }
}

TEST_CASE("oracle predictor has zero prediction error on noiseless data") {
  // Y is a deterministic function of X
  const int n = 60;
  ObservedSample s;
  s.y.resize(n);
  s.delta.assign(n, 1);
  s.x.resize(n, 1);
  Rng rng(4);
  for (int i = 0; i < n; ++i) {
    s.x(i, 0) = rng.uniform();
    s.y[i] = 2.0 * s.x(i, 0) + 1.0;
  }
  const PredictorFactory oracle = [](const ObservedSample&) {
    return [](const Eigen::VectorXd& x) { return 2.0 * x[0] + 1.0; };
  };
  CHECK(cv_prediction_error_with(s, 0.3, oracle) == 0.0);
}

TEST_CASE("constant predictor PE equals the direct median check loss") {
  const GeneratedData data = make_dgp(Dgp::A, 80, 0.0, 15);
  const double tau = 0.3;
  const PredictorFactory constant = [tau](const ObservedSample& reduced) {
    std::vector<double> ys(reduced.y.data(), reduced.y.data() + reduced.n());
    const double q = sample_quantile(ys, tau);
    return [q](const Eigen::VectorXd&) { return q; };
  };
  const double pe = cv_prediction_error_with(data.sample, tau, constant);

  // direct evaluation of the same criterion
  std::vector<double> losses;
  for (Eigen::Index i = 0; i < data.sample.n(); ++i) {
    std::vector<double> rest;
    for (Eigen::Index j = 0; j < data.sample.n(); ++j)
      if (j != i) rest.push_back(data.sample.y[j]);
    const double q = sample_quantile(rest, tau);
    losses.push_back(check_loss(data.sample.y[i] - q, tau));
  }
  CHECK(pe == sample_quantile(losses, 0.5));
}

TEST_CASE("SP estimator beats the constant predictor in prediction error") {
  const double tau = 0.3;
  int wins = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const GeneratedData data =
        make_dgp(Dgp::A, 400, 0.0, 42000 + static_cast<std::uint64_t>(s));
    FitConfig config = fast_config(CopulaMode::SP, CensoringKind::none);
    config.vine.smoother.grid_m = 32;  // the comparison is insensitive to m
    const double pe_sp = cv_prediction_error(data.sample, tau, config);

    const PredictorFactory constant = [tau](const ObservedSample& reduced) {
      std::vector<double> ys(reduced.y.data(), reduced.y.data() + reduced.n());
      const double q = sample_quantile(ys, tau);
      return [q](const Eigen::VectorXd&) { return q; };
    };
    const double pe_const = cv_prediction_error_with(data.sample, tau, constant);
    wins += pe_sp < pe_const;
  }
  CHECK(wins >= 45);  // >= 90% of seeds
}

TEST_CASE("refit_vine keeps structure and bandwidths frozen") {
  const GeneratedData data = make_dgp(Dgp::A, 300, 0.0, 21);
  Eigen::MatrixXd cols(300, 3);
  cols.col(0) = data.sample.y;
  cols.rightCols(2) = data.sample.x;
  const Eigen::MatrixXd pseudo = pseudo_observations(cols);

  VineConfig config;
  config.mode = CopulaMode::SP;
  config.smoother.nn_fraction = 0.6;
  const VineCopulaModel full = fit_vine(pseudo.col(0), pseudo.rightCols(2), config);

  // refit on a subset: bandwidths and noisy family carry over
  const Eigen::VectorXd sub_u0 = pseudo.col(0).head(250);
  const Eigen::MatrixXd sub_x = pseudo.rightCols(2).topRows(250);
  const VineCopulaModel refit = refit_vine(sub_u0, sub_x, full, config);
  CHECK(refit.interest[0].grid.bandwidth == full.interest[0].grid.bandwidth);
  CHECK(refit.interest[1].grid.bandwidth == full.interest[1].grid.bandwidth);
  REQUIRE(refit.noisy.levels.size() == 1);
  CHECK(refit.noisy.levels[0][0].model.par.family.tag ==
        full.noisy.levels[0][0].model.par.family.tag);
  // but the refitted grids see different data
  CHECK(refit.interest[0].grid.values != full.interest[0].grid.values);
}

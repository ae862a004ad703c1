#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cqreg/cqr.hpp"
#include "cqreg/rng.hpp"

namespace cqreg {

enum class Dgp { A, B, C, D, M2, Dette };

std::string dgp_name(Dgp tag);
Dgp parse_dgp(const std::string& text);
int dgp_dimension(Dgp tag);

struct DgpSpec {
  Dgp tag = Dgp::A;
  int n = 200;
  double censoring_level = 0.0;  // one of 0, 0.3, 0.5
};

struct GeneratedData {
  ObservedSample sample;
  Eigen::VectorXd latent_t;  // diagnostics only, never fed to estimators
};

// rows are Phi(Z) for Z ~ N(0, corr); throws on a non-PD matrix
Eigen::MatrixXd sample_gaussian_copula(const Eigen::MatrixXd& corr, Eigen::Index n,
                                       Rng& rng);

GeneratedData gen_dgp(const DgpSpec& spec, Rng& rng);

// evaluation points drawn from the spec's covariate law
Eigen::MatrixXd draw_eval_points(const DgpSpec& spec, Eigen::Index count, Rng& rng);

// closed-form true conditional quantile of the spec
double true_quantile(const DgpSpec& spec, const Eigen::VectorXd& x, double tau);

// mean over points of the across-replication mean squared error
double imse(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truths);

// (IMAE, dispersion): mean over points of the across-replication median
// absolute error, and of the interquartile range of absolute errors
std::pair<double, double> imae_and_dispersion(const Eigen::MatrixXd& estimates,
                                              const Eigen::VectorXd& truths);

struct EstimatorSpec {
  std::string tag;  // column label
  CopulaMode mode = CopulaMode::SP;
  CensoringKind censoring = CensoringKind::km;
  CoxBaseline cox_baseline = CoxBaseline::exponential;
  bool reference_cox = false;  // parametric Cox plug-in, reported for context
};

struct ExperimentConfig {
  DgpSpec dgp;
  std::vector<double> taus = {0.3};
  int B = 100;
  int eval_points = 10;
  std::uint64_t seed = 1;
  std::vector<EstimatorSpec> estimators;
  std::vector<PairFamily> candidates = default_candidate_families();
  SmootherConfig smoother;
  bool parallel = true;
  double max_exclusion_fraction = 0.02;
};

struct ExclusionRecord {
  int replication;
  std::string estimator;
  std::string reason;
};

struct ExperimentResult {
  Eigen::MatrixXd eval_x;                 // N x d
  std::vector<Eigen::VectorXd> truths;    // per tau
  // estimates[estimator][tau]: B x N, NaN rows for excluded replications
  std::vector<std::vector<Eigen::MatrixXd>> estimates;
  std::vector<ExclusionRecord> exclusions;
  std::vector<int> excluded_reps;  // sorted, unique
  int clamped_weights = 0;
  double runtime_seconds = 0.0;
  bool valid = true;

  // aggregates over included replications, recomputable from the estimates
  double imse_of(std::size_t estimator, std::size_t tau_index) const;
  std::pair<double, double> imae_of(std::size_t estimator, std::size_t tau_index) const;

  int included_count() const;
};

// Seeded replication engine. Fully reproducible from (config, seed); the
// seed stream is split by replication index, never by scheduling order.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace cqreg

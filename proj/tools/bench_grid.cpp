// Benchmark of the OpenMP grid kernels against the serial reference, plus the
// replication engine in both modes.
#include <chrono>
#include <cstdio>

#include "cqreg/probit_grid.hpp"
#include "cqreg/rng.hpp"
#include "cqreg/simlab.hpp"

using namespace cqreg;

namespace {

double time_once(const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) best = std::min(best, time_once(fn));
  return best;
}

}  // namespace

int main() {
  // correlated pseudo-observations, n = 2000
  Eigen::MatrixXd corr(2, 2);
  corr << 1.0, 0.5, 0.5, 1.0;
  Rng rng(42);
  const Eigen::MatrixXd u = sample_gaussian_copula(corr, 2000, rng);

  SmootherConfig serial_cfg;
  serial_cfg.nn_fraction = 0.6;
  serial_cfg.parallel = false;
  SmootherConfig parallel_cfg = serial_cfg;
  parallel_cfg.parallel = true;

  std::printf("probit local-likelihood grid fit, n=2000, m=%d\n", serial_cfg.grid_m);
  const double t_serial =
      best_of(3, [&] { fit_probit_ll(u.col(0), u.col(1), serial_cfg); });
  const double t_parallel =
      best_of(3, [&] { fit_probit_ll(u.col(0), u.col(1), parallel_cfg); });
  std::printf("  serial   %8.1f ms\n", t_serial * 1e3);
  std::printf("  openmp   %8.1f ms   (speedup %.2fx)\n", t_parallel * 1e3,
              t_serial / t_parallel);

  const DensityGrid gs = fit_probit_ll(u.col(0), u.col(1), serial_cfg);
  const DensityGrid gp = fit_probit_ll(u.col(0), u.col(1), parallel_cfg);
  std::printf("  identical values: %s\n", gs.values == gp.values ? "yes" : "NO");

  ExperimentConfig config;
  config.dgp = {Dgp::A, 100, 0.0};
  config.taus = {0.3};
  config.B = 8;
  config.seed = 7;
  config.smoother.nn_fraction = 0.6;
  config.estimators.push_back({"SP:km", CopulaMode::SP, CensoringKind::km,
                               CoxBaseline::exponential, false});

  std::printf("replication engine, DGP A, n=100, B=%d\n", config.B);
  ExperimentConfig serial_run = config;
  serial_run.parallel = false;
  ExperimentConfig parallel_run = config;
  parallel_run.parallel = true;
  const double r_serial = best_of(2, [&] { run_experiment(serial_run); });
  const double r_parallel = best_of(2, [&] { run_experiment(parallel_run); });
  std::printf("  serial   %8.1f ms\n", r_serial * 1e3);
  std::printf("  openmp   %8.1f ms   (speedup %.2fx)\n", r_parallel * 1e3,
              r_serial / r_parallel);
  return 0;
}

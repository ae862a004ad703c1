#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cqreg/cli.hpp"
#include "cqreg/cqr.hpp"
#include "cqreg/simlab.hpp"

using namespace cqreg;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  const int code = run_cli(args);
  std::cerr.rdbuf(old);
  return {code, captured.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("/tmp/cqreg_cli_tests") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("simulate writes one aggregated row per tau and is reproducible") {
  const fs::path dir = fresh_dir("simulate");
  const std::vector<std::string> base = {
      "simulate", "--dgp", "A",   "--n",    "80",        "--censoring", "0.3",
      "--tau",    "0.3",   "--B", "5",      "--seed",    "7",           "--mode",
      "SP",       "--fraction",   "0.6",    "--out",     (dir / "run1").string()};
  CHECK(cli(base).code == 0);

  const auto rows = lines_of(slurp((dir / "run1.csv").string()));
  REQUIRE(rows.size() == 2);  // header + one aggregated row
  CHECK(rows[0] ==
        "dgp,n,censoring,tau,SP:km_imse1000,SP:km_imae,SP:km_dispersion");
  CHECK(rows[1].substr(0, 13) == "A,80,0.3,0.3,");

  std::vector<std::string> again = base;
  again.back() = (dir / "run2").string();
  CHECK(cli(again).code == 0);
  CHECK(slurp((dir / "run1.csv").string()) == slurp((dir / "run2.csv").string()));

  // sidecars agree once the wall-clock runtime is removed
  auto j1 = nlohmann::json::parse(slurp((dir / "run1.json").string()));
  auto j2 = nlohmann::json::parse(slurp((dir / "run2.json").string()));
  j1.erase("runtime_seconds");
  j2.erase("runtime_seconds");
  CHECK(j1 == j2);
}

TEST_CASE("simulate validates tau") {
  const CliResult r = cli({"simulate", "--dgp", "A", "--n", "50", "--tau", "1.2",
                           "--B", "2", "--seed", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--tau") != std::string::npos);
}

TEST_CASE("simulate rejects an unknown dgp") {
  const CliResult r =
      cli({"simulate", "--dgp", "Q", "--n", "50", "--B", "2", "--seed", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--dgp") != std::string::npos);
}

TEST_CASE("exported data round-trips through fit bit-for-bit") {
  const fs::path dir = fresh_dir("roundtrip");
  const std::string data_path = (dir / "data.csv").string();
  CHECK(cli({"simulate", "--dgp", "A", "--n", "120", "--B", "1", "--seed", "11",
             "--fraction", "0.6", "--out", (dir / "sim").string(),
             "--export-data", data_path})
            .code == 0);

  CHECK(cli({"fit", "--data", data_path, "--mode", "SP", "--censoring-model",
             "none", "--fraction", "0.6", "--seed", "11", "--tau", "0.3", "--at",
             "0.5,0.5", "--out", (dir / "fit").string()})
            .code == 0);

  // the same fit through the library, on the same generated sample
  DgpSpec spec{Dgp::A, 120, 0.0};
  Rng rng(derive_seed(11, 1));
  const GeneratedData data = gen_dgp(spec, rng);
  FitConfig config;
  config.vine.mode = CopulaMode::SP;
  config.vine.smoother.nn_fraction = 0.6;
  config.censoring = CensoringKind::none;
  const QuantileEstimator est = fit_estimator(data.sample, config);
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  const double expected = predict(est, x, 0.3);

  const auto rows = lines_of(slurp((dir / "fit_predictions.csv").string()));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "x1,x2,tau,m_hat");
  CHECK(rows[1] == "0.5,0.5,0.3," + fmt6(expected));
}

TEST_CASE("fit validates the delta column with a line number") {
  const fs::path dir = fresh_dir("baddelta");
  const std::string path = (dir / "bad.csv").string();
  {
    std::ofstream out(path);
    out << "y,delta,x1\n1.0,1,0.5\n2.0,2,0.25\n";
  }
  const CliResult r =
      cli({"fit", "--data", path, "--seed", "1", "--at", "0.5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(r.err.find("delta") != std::string::npos);
}

TEST_CASE("fit with independence copula reproduces sample quantiles") {
  const fs::path dir = fresh_dir("indep");
  const std::string path = (dir / "data.csv").string();
  DgpSpec spec{Dgp::A, 90, 0.0};
  Rng rng(3);
  const GeneratedData data = gen_dgp(spec, rng);
  {
    std::ofstream out(path);
    out.precision(17);
    out << "y,delta,x1,x2\n";
    for (int i = 0; i < 90; ++i)
      out << data.sample.y[i] << ",1," << data.sample.x(i, 0) << ","
          << data.sample.x(i, 1) << "\n";
  }
  CHECK(cli({"fit", "--data", path, "--mode", "P", "--families", "independence",
             "--censoring-model", "none", "--seed", "5", "--tau", "0.25", "--tau",
             "0.5", "--at", "0.3,0.9", "--curve", "--out", (dir / "out").string()})
            .code == 0);

  std::vector<double> ys(data.sample.y.data(), data.sample.y.data() + 90);
  std::sort(ys.begin(), ys.end());
  const double q25 = ys[static_cast<std::size_t>(std::ceil(0.25 * 90)) - 1];
  const double q50 = ys[static_cast<std::size_t>(std::ceil(0.5 * 90)) - 1];

  const auto rows = lines_of(slurp((dir / "out_predictions.csv").string()));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == "0.3,0.9,0.25," + fmt6(q25));
  CHECK(rows[2] == "0.3,0.9,0.5," + fmt6(q50));

  const auto curve = lines_of(slurp((dir / "out_curves.csv").string()));
  REQUIRE(curve.size() == 2);
  CHECK(curve[0] == "x1,x2,tau_0.25,tau_0.5");
  CHECK(curve[1] == "0.3,0.9," + fmt6(q25) + "," + fmt6(q50));
}

TEST_CASE("pe reports zero loss for constant noiseless data") {
  const fs::path dir = fresh_dir("pe");
  const std::string path = (dir / "flat.csv").string();
  {
    std::ofstream out(path);
    out << "y,delta,x1\n";
    Rng rng(9);
    for (int i = 0; i < 45; ++i) out << "3.7,1," << rng.uniform() << "\n";
  }
  CHECK(cli({"pe", "--data", path, "--tau", "0.3", "--tau", "0.5", "--estimator",
             "P:none", "--estimator", "SP:none", "--families", "independence",
             "--seed", "2", "--out", (dir / "pe").string()})
            .code == 0);
  const auto rows = lines_of(slurp((dir / "pe_pe.csv").string()));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "tau,P:none_pe_x10,SP:none_pe_x10");
  CHECK(rows[1] == "0.3,0,0");
  CHECK(rows[2] == "0.5,0,0");
}

TEST_CASE("dette-demo produces the figure contrast") {
  const fs::path dir = fresh_dir("dette");
  CHECK(cli({"dette-demo", "--seed", "21", "--fraction", "0.3", "--out",
             (dir / "dette").string()})
            .code == 0);
  const auto rows = lines_of(slurp((dir / "dette.csv").string()));
  REQUIRE(rows.size() == 102);
  CHECK(rows[0] == "x,truth,parametric,nonparametric");

  double mse_p = 0, mse_np = 0;
  std::vector<double> parametric;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 4);
    mse_p += std::pow(vals[2] - vals[1], 2);
    mse_np += std::pow(vals[3] - vals[1], 2);
    parametric.push_back(vals[2]);
  }
  // the gaussian-copula curve is monotone in x, the parabola is not
  const bool increasing = parametric.back() >= parametric.front();
  for (std::size_t i = 1; i < parametric.size(); ++i) {
    if (increasing)
      CHECK(parametric[i] >= parametric[i - 1] - 1e-12);
    else
      CHECK(parametric[i] <= parametric[i - 1] + 1e-12);
  }
  CHECK(mse_np < mse_p);
}

TEST_CASE("artifact paths are printed to standard output") {
  const fs::path dir = fresh_dir("paths");
  std::ostringstream captured;
  std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
  const int code = run_cli({"simulate", "--dgp", "A", "--n", "60", "--B", "2",
                            "--seed", "4", "--fraction", "0.6", "--out",
                            (dir / "r").string()});
  std::cout.rdbuf(old);
  CHECK(code == 0);
  CHECK(captured.str().find((dir / "r.csv").string()) != std::string::npos);
  CHECK(captured.str().find((dir / "r.json").string()) != std::string::npos);
}

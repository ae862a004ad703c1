#include "cqreg/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "cqreg/cqr.hpp"
#include "cqreg/simlab.hpp"

namespace cqreg {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvalidExperiment = 3;
constexpr int kExitFitFailure = 4;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void announce(const std::string& path) { std::cout << path << "\n"; }

struct CliError {
  int code;
  std::string message;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<PairFamily> parse_families_flag(const std::string& flag) {
  std::vector<PairFamily> out;
  for (const std::string& name : split(flag, ',')) {
    if (name.empty()) continue;
    out.push_back(parse_family(name));
  }
  if (out.empty()) throw CliError{kExitConfig, "--families: empty candidate list"};
  return out;
}

EstimatorSpec parse_estimator_flag(const std::string& text) {
  EstimatorSpec spec;
  spec.tag = text;
  if (text == "coxref") {
    spec.reference_cox = true;
    return spec;
  }
  const auto parts = split(text, ':');
  if (parts.empty() || parts.size() > 2)
    throw CliError{kExitConfig, "--estimator: expected MODE[:km|cox|none], got " + text};
  try {
    spec.mode = parse_mode(parts[0]);
  } catch (const std::exception& e) {
    throw CliError{kExitConfig, std::string("--estimator: ") + e.what()};
  }
  if (parts.size() == 2) {
    if (parts[1] == "km")
      spec.censoring = CensoringKind::km;
    else if (parts[1] == "cox")
      spec.censoring = CensoringKind::cox;
    else if (parts[1] == "none")
      spec.censoring = CensoringKind::none;
    else
      throw CliError{kExitConfig, "--estimator: unknown censoring model " + parts[1]};
  }
  return spec;
}

void check_taus(const std::vector<double>& taus) {
  for (double tau : taus)
    if (!(tau > 0.0 && tau < 1.0))
      throw CliError{kExitConfig,
                     "--tau: value " + fmt6(tau) + " must lie strictly in (0,1)"};
}

struct DataFile {
  ObservedSample sample;
};

// header y,delta,x1,...,xd; plain decimal CSV
DataFile read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitConfig, "cannot open data file " + path};
  std::string line;
  if (!std::getline(in, line))
    throw CliError{kExitConfig, path + ": empty file"};
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "y" || header[1] != "delta")
    throw CliError{kExitConfig, path + ": line 1: expected header y,delta,x1,..."};
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] != "x" + std::to_string(j - 1))
      throw CliError{kExitConfig,
                     path + ": line 1: expected column x" + std::to_string(j - 1)};
  }
  const std::size_t d = header.size() - 2;

  std::vector<double> ys;
  std::vector<int> deltas;
  std::vector<double> xs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != d + 2)
      throw CliError{kExitConfig, path + ": line " + std::to_string(line_no) +
                                      ": expected " + std::to_string(d + 2) +
                                      " columns, got " + std::to_string(cells.size())};
    try {
      std::size_t pos = 0;
      const double y = std::stod(cells[0], &pos);
      const double delta_raw = std::stod(cells[1]);
      if (delta_raw != 0.0 && delta_raw != 1.0)
        throw CliError{kExitConfig, path + ": line " + std::to_string(line_no) +
                                        ": delta must be 0 or 1"};
      ys.push_back(y);
      deltas.push_back(static_cast<int>(delta_raw));
      for (std::size_t j = 0; j < d; ++j) xs.push_back(std::stod(cells[2 + j]));
    } catch (const CliError&) {
      throw;
    } catch (const std::exception&) {
      throw CliError{kExitConfig,
                     path + ": line " + std::to_string(line_no) + ": malformed number"};
    }
  }
  if (ys.empty()) throw CliError{kExitConfig, path + ": no data rows"};

  DataFile file;
  const auto n = static_cast<Eigen::Index>(ys.size());
  file.sample.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  file.sample.delta = deltas;
  file.sample.x.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      file.sample.x(i, static_cast<Eigen::Index>(j)) =
          xs[static_cast<std::size_t>(i) * d + j];
  return file;
}

Eigen::MatrixXd read_points_csv(const std::string& path, Eigen::Index d) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitConfig, "cannot open points file " + path};
  std::string line;
  if (!std::getline(in, line)) throw CliError{kExitConfig, path + ": empty file"};
  const auto header = split(line, ',');
  if (static_cast<Eigen::Index>(header.size()) != d)
    throw CliError{kExitConfig, path + ": expected " + std::to_string(d) +
                                    " covariate columns"};
  std::vector<double> vals;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != d)
      throw CliError{kExitConfig,
                     path + ": line " + std::to_string(line_no) + ": wrong arity"};
    try {
      for (const auto& c : cells) vals.push_back(std::stod(c));
    } catch (const std::exception&) {
      throw CliError{kExitConfig,
                     path + ": line " + std::to_string(line_no) + ": malformed number"};
    }
  }
  const auto rows = static_cast<Eigen::Index>(vals.size()) / d;
  Eigen::MatrixXd out(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      out(i, j) = vals[static_cast<std::size_t>(i * d + j)];
  return out;
}

void write_data_csv(const ObservedSample& sample, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CliError{kExitConfig, "cannot write " + path};
  out << "y,delta";
  for (Eigen::Index j = 0; j < sample.d(); ++j) out << ",x" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    out << fmt_full(sample.y[i]) << "," << sample.delta[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < sample.d(); ++j) out << "," << fmt_full(sample.x(i, j));
    out << "\n";
  }
  announce(path);
}

// shared flags for the fitting subcommands
struct FitFlags {
  std::string data_path;
  std::string mode = "SP";
  std::string censoring_model = "km";
  std::string families;
  double fraction = -1.0;
  std::uint64_t seed = 0;
  bool serial = false;
};

FitConfig make_fit_config(const FitFlags& flags) {
  FitConfig config;
  try {
    config.vine.mode = parse_mode(flags.mode);
  } catch (const std::exception& e) {
    throw CliError{kExitConfig, std::string("--mode: ") + e.what()};
  }
  if (flags.censoring_model == "km")
    config.censoring = CensoringKind::km;
  else if (flags.censoring_model == "cox")
    config.censoring = CensoringKind::cox;
  else if (flags.censoring_model == "none")
    config.censoring = CensoringKind::none;
  else
    throw CliError{kExitConfig,
                   "--censoring-model: unknown model " + flags.censoring_model};
  if (!flags.families.empty())
    config.vine.candidates = parse_families_flag(flags.families);
  if (flags.fraction > 0.0) config.vine.smoother.nn_fraction = flags.fraction;
  config.vine.smoother.cv_seed = flags.seed;
  config.vine.smoother.parallel = !flags.serial;
  return config;
}

int cmd_simulate(const std::string& dgp, int n, double censoring,
                 std::vector<double> taus, const std::vector<std::string>& estimators,
                 const std::string& mode, const std::string& censoring_model, int B,
                 std::uint64_t seed, const std::string& out,
                 const std::string& families, double fraction, bool serial,
                 const std::string& export_data) {
  check_taus(taus);
  if (taus.empty()) taus = {0.3};
  ExperimentConfig config;
  try {
    config.dgp.tag = parse_dgp(dgp);
  } catch (const std::exception& e) {
    throw CliError{kExitConfig, std::string("--dgp: ") + e.what()};
  }
  config.dgp.n = n;
  config.dgp.censoring_level = censoring;
  config.taus = taus;
  config.B = B;
  config.seed = seed;
  config.parallel = !serial;
  if (!families.empty()) config.candidates = parse_families_flag(families);
  if (fraction > 0.0) config.smoother.nn_fraction = fraction;

  if (!estimators.empty()) {
    for (const auto& text : estimators)
      config.estimators.push_back(parse_estimator_flag(text));
  } else {
    EstimatorSpec spec = parse_estimator_flag(mode + ":" + censoring_model);
    spec.tag = mode + ":" + censoring_model;
    config.estimators.push_back(spec);
  }

  if (!export_data.empty()) {
    Rng rng(derive_seed(seed, 1));  // replication 0's stream
    const GeneratedData data = gen_dgp(config.dgp, rng);
    write_data_csv(data.sample, export_data);
  }

  const ExperimentResult result = run_experiment(config);

  const std::string csv_path = out + ".csv";
  {
    std::ofstream csv(csv_path);
    if (!csv) throw CliError{kExitConfig, "cannot write " + csv_path};
    csv << "dgp,n,censoring,tau";
    for (const auto& est : config.estimators)
      csv << "," << est.tag << "_imse1000," << est.tag << "_imae," << est.tag
          << "_dispersion";
    csv << "\n";
    for (std::size_t t = 0; t < config.taus.size(); ++t) {
      csv << dgp << "," << n << "," << fmt6(censoring) << "," << fmt6(config.taus[t]);
      for (std::size_t e = 0; e < config.estimators.size(); ++e) {
        if (result.included_count() >= 1)
          csv << "," << fmt6(result.imse_of(e, t) * 1000.0);
        else
          csv << ",nan";
        if (result.included_count() >= 4) {  // the robust metrics need quartiles
          const auto [imae_val, disp] = result.imae_of(e, t);
          csv << "," << fmt6(imae_val) << "," << fmt6(disp);
        } else {
          csv << ",nan,nan";
        }
      }
      csv << "\n";
    }
  }
  announce(csv_path);

  const std::string json_path = out + ".json";
  {
    nlohmann::json j;
    j["seed"] = seed;
    j["config"] = {{"dgp", dgp},
                   {"n", n},
                   {"censoring", censoring},
                   {"taus", config.taus},
                   {"B", B},
                   {"fraction", fraction},
                   {"families", families},
                   {"serial", serial}};
    nlohmann::json est_list = nlohmann::json::array();
    for (const auto& est : config.estimators) est_list.push_back(est.tag);
    j["config"]["estimators"] = est_list;
    nlohmann::json eval_pts = nlohmann::json::array();
    for (Eigen::Index p = 0; p < result.eval_x.rows(); ++p) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < result.eval_x.cols(); ++c)
        row.push_back(result.eval_x(p, c));
      eval_pts.push_back(row);
    }
    j["eval_points"] = eval_pts;
    nlohmann::json excl = nlohmann::json::array();
    for (const auto& rec : result.exclusions)
      excl.push_back({{"replication", rec.replication},
                      {"estimator", rec.estimator},
                      {"reason", rec.reason}});
    j["exclusions"] = excl;
    j["excluded_replications"] = result.excluded_reps;
    j["clamped_weights"] = result.clamped_weights;
    j["runtime_seconds"] = result.runtime_seconds;
    std::ofstream js(json_path);
    if (!js) throw CliError{kExitConfig, "cannot write " + json_path};
    js << j.dump(2) << "\n";
  }
  announce(json_path);

  if (!result.valid) {
    std::cerr << "experiment invalid: " << result.excluded_reps.size() << " of " << B
              << " replications excluded (limit "
              << config.max_exclusion_fraction * 100 << "%)\n";
    return kExitInvalidExperiment;
  }
  return kExitOk;
}

int cmd_fit_predict(const FitFlags& flags, const std::vector<double>& taus_in,
                    const std::string& points_path,
                    const std::vector<std::string>& at_flags, bool curve,
                    const std::string& out, const std::string& dump_model) {
  std::vector<double> taus = taus_in;
  if (taus.empty()) taus = {0.5};
  check_taus(taus);
  std::sort(taus.begin(), taus.end());

  const DataFile file = read_data_csv(flags.data_path);
  const FitConfig config = make_fit_config(flags);

  Eigen::MatrixXd points;
  if (!at_flags.empty()) {
    points.resize(static_cast<Eigen::Index>(at_flags.size()), file.sample.d());
    for (std::size_t i = 0; i < at_flags.size(); ++i) {
      const auto cells = split(at_flags[i], ',');
      if (static_cast<Eigen::Index>(cells.size()) != file.sample.d())
        throw CliError{kExitConfig, "--at: expected " +
                                        std::to_string(file.sample.d()) +
                                        " coordinates in '" + at_flags[i] + "'"};
      try {
        for (std::size_t j = 0; j < cells.size(); ++j)
          points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              std::stod(cells[j]);
      } catch (const std::exception&) {
        throw CliError{kExitConfig, "--at: malformed number in '" + at_flags[i] + "'"};
      }
    }
  } else if (!points_path.empty()) {
    points = read_points_csv(points_path, file.sample.d());
  } else {
    points = file.sample.x;  // default: training covariate rows
  }

  QuantileEstimator estimator;
  try {
    estimator = fit_estimator(file.sample, config);
  } catch (const std::exception& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return kExitFitFailure;
  }

  const std::string pred_path = out + "_predictions.csv";
  std::vector<QuantileCurve> curves;
  curves.reserve(static_cast<std::size_t>(points.rows()));
  try {
    for (Eigen::Index p = 0; p < points.rows(); ++p)
      curves.push_back(predict_curve(estimator, points.row(p).transpose(), taus));
  } catch (const std::exception& e) {
    std::cerr << "prediction failed: " << e.what() << "\n";
    return kExitFitFailure;
  }
  {
    std::ofstream csv(pred_path);
    if (!csv) throw CliError{kExitConfig, "cannot write " + pred_path};
    for (Eigen::Index j = 0; j < points.cols(); ++j) csv << "x" << (j + 1) << ",";
    csv << "tau,m_hat\n";
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      for (std::size_t t = 0; t < taus.size(); ++t) {
        for (Eigen::Index j = 0; j < points.cols(); ++j) csv << fmt6(points(p, j)) << ",";
        csv << fmt6(taus[t]) << ","
            << fmt6(curves[static_cast<std::size_t>(p)].values[t]) << "\n";
      }
    }
  }
  announce(pred_path);

  if (curve) {
    const std::string curve_path = out + "_curves.csv";
    std::ofstream csv(curve_path);
    if (!csv) throw CliError{kExitConfig, "cannot write " + curve_path};
    for (Eigen::Index j = 0; j < points.cols(); ++j) csv << "x" << (j + 1) << ",";
    for (std::size_t t = 0; t < taus.size(); ++t)
      csv << "tau_" << fmt6(taus[t]) << (t + 1 < taus.size() ? "," : "\n");
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      for (Eigen::Index j = 0; j < points.cols(); ++j) csv << fmt6(points(p, j)) << ",";
      for (std::size_t t = 0; t < taus.size(); ++t)
        csv << fmt6(curves[static_cast<std::size_t>(p)].values[t])
            << (t + 1 < taus.size() ? "," : "\n");
    }
    announce(curve_path);
  }

  if (!dump_model.empty()) {
    std::ofstream js(dump_model);
    if (!js) throw CliError{kExitConfig, "cannot write " + dump_model};
    js << describe_vine(estimator.vine) << "\n";
    announce(dump_model);
    int grid_index = 0;
    for (const auto& pair : estimator.vine.interest) {
      if (pair.kind == PairCopulaModel::Kind::grid) {
        const std::string grid_path =
            dump_model + ".grid" + std::to_string(grid_index++) + ".txt";
        save_density_grid(pair.grid, grid_path);
        announce(grid_path);
      }
    }
  }
  return kExitOk;
}

int cmd_pe(const FitFlags& flags, std::vector<double> taus,
           const std::vector<std::string>& estimators, const std::string& out,
           bool serial) {
  if (taus.empty()) taus = {0.1, 0.3, 0.5, 0.7};
  check_taus(taus);
  const DataFile file = read_data_csv(flags.data_path);

  std::vector<std::string> est_texts = estimators;
  if (est_texts.empty()) est_texts = {flags.mode + ":" + flags.censoring_model};

  std::vector<FitConfig> configs;
  for (const auto& text : est_texts) {
    const EstimatorSpec spec = parse_estimator_flag(text);
    if (spec.reference_cox)
      throw CliError{kExitConfig, "pe: coxref is not a copula estimator config"};
    FitFlags f = flags;
    f.mode = mode_name(spec.mode);
    f.censoring_model = spec.censoring == CensoringKind::km
                            ? "km"
                            : (spec.censoring == CensoringKind::cox ? "cox" : "none");
    configs.push_back(make_fit_config(f));
  }

  const std::string pe_path = out + "_pe.csv";
  std::ofstream csv(pe_path);
  if (!csv) throw CliError{kExitConfig, "cannot write " + pe_path};
  csv << "tau";
  for (const auto& text : est_texts) csv << "," << text << "_pe_x10";
  csv << "\n";
  for (double tau : taus) {
    csv << fmt6(tau);
    for (const auto& config : configs) {
      double pe;
      try {
        pe = cv_prediction_error(file.sample, tau, config, !serial);
      } catch (const std::exception& e) {
        std::cerr << "pe failed at tau=" << tau << ": " << e.what() << "\n";
        return kExitFitFailure;
      }
      csv << "," << fmt6(pe * 10.0);
    }
    csv << "\n";
  }
  csv.close();
  announce(pe_path);
  return kExitOk;
}

int cmd_dette_demo(std::uint64_t seed, int n, double tau, double fraction,
                   const std::string& out, bool serial) {
  if (!(tau > 0.0 && tau < 1.0))
    throw CliError{kExitConfig, "--tau: value must lie strictly in (0,1)"};
  DgpSpec spec;
  spec.tag = Dgp::Dette;
  spec.n = n;
  spec.censoring_level = 0.0;
  Rng rng(derive_seed(seed, 1));
  const GeneratedData data = gen_dgp(spec, rng);

  FitFlags base;
  base.seed = seed;
  base.serial = serial;
  base.censoring_model = "none";
  if (fraction > 0.0) base.fraction = fraction;

  FitFlags para = base;
  para.mode = "P";
  para.families = "gaussian";
  FitFlags nonpara = base;
  nonpara.mode = "SP";

  QuantileEstimator est_para, est_nonpara;
  try {
    est_para = fit_estimator(data.sample, make_fit_config(para));
    est_nonpara = fit_estimator(data.sample, make_fit_config(nonpara));
  } catch (const std::exception& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return kExitFitFailure;
  }

  const std::string path = out + ".csv";
  std::ofstream csv(path);
  if (!csv) throw CliError{kExitConfig, "cannot write " + path};
  csv << "x,truth,parametric,nonparametric\n";
  for (int k = 0; k <= 100; ++k) {
    const double x = static_cast<double>(k) / 100.0;
    Eigen::VectorXd xv(1);
    xv << x;
    const double truth = true_quantile(spec, xv, tau);
    double mp, mnp;
    try {
      mp = predict(est_para, xv, tau);
      mnp = predict(est_nonpara, xv, tau);
    } catch (const std::exception& e) {
      std::cerr << "prediction failed: " << e.what() << "\n";
      return kExitFitFailure;
    }
    csv << fmt6(x) << "," << fmt6(truth) << "," << fmt6(mp) << "," << fmt6(mnp)
        << "\n";
  }
  csv.close();
  announce(path);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"semiparametric copula-based censored quantile regression"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a seeded Monte Carlo experiment");
  std::string sim_dgp;
  int sim_n = 200;
  double sim_censoring = 0.0;
  std::vector<double> sim_taus;
  std::vector<std::string> sim_estimators;
  std::string sim_mode = "SP", sim_cens_model = "km";
  int sim_b = 100;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "experiment", sim_families, sim_export;
  double sim_fraction = -1.0;
  bool sim_serial = false;
  sim->add_option("--dgp", sim_dgp, "data generating process (A,B,C,D,M2,DETTE)")
      ->required();
  sim->add_option("--n", sim_n, "sample size per replication")->required();
  sim->add_option("--censoring", sim_censoring, "censoring level (0, 0.3, 0.5)");
  sim->add_option("--tau", sim_taus, "quantile level (repeatable)");
  sim->add_option("--estimator", sim_estimators,
                  "estimator spec MODE[:km|cox|none] or coxref (repeatable)");
  sim->add_option("--mode", sim_mode, "copula mode (SP, P, NP)");
  sim->add_option("--censoring-model", sim_cens_model, "censoring model (km, cox)");
  sim->add_option("--B", sim_b, "number of replications");
  sim->add_option("--seed", sim_seed, "master seed")->required();
  sim->add_option("--out", sim_out, "output path prefix");
  sim->add_option("--families", sim_families, "comma-separated candidate families");
  sim->add_option("--fraction", sim_fraction,
                  "fixed nearest-neighbor bandwidth fraction");
  sim->add_flag("--serial", sim_serial, "disable parallel replications");
  sim->add_option("--export-data", sim_export,
                  "also write the first replication's dataset to this CSV");

  // fit / predict (shared handler)
  FitFlags fit_flags;
  std::vector<double> fit_taus;
  std::string fit_points, fit_out = "fit", fit_dump;
  std::vector<std::string> fit_at;
  bool fit_curve = false;
  auto add_fit_options = [&](CLI::App* cmd) {
    cmd->add_option("--data", fit_flags.data_path, "input CSV (y,delta,x1,...,xd)")
        ->required();
    cmd->add_option("--mode", fit_flags.mode, "copula mode (SP, P, NP)");
    cmd->add_option("--censoring-model", fit_flags.censoring_model,
                    "censoring model (none, km, cox)");
    cmd->add_option("--families", fit_flags.families,
                    "comma-separated candidate families");
    cmd->add_option("--fraction", fit_flags.fraction,
                    "fixed nearest-neighbor bandwidth fraction");
    cmd->add_option("--seed", fit_flags.seed, "seed for bandwidth cross-validation")
        ->required();
    cmd->add_option("--tau", fit_taus, "quantile level (repeatable)");
    cmd->add_option("--points", fit_points, "CSV of prediction points (x1,...,xd)");
    cmd->add_option("--at", fit_at, "inline prediction point v1,v2,... (repeatable)");
    cmd->add_flag("--curve", fit_curve, "also write wide-format quantile curves");
    cmd->add_option("--out", fit_out, "output path prefix");
    cmd->add_flag("--serial", fit_flags.serial, "disable parallel fitting");
    cmd->add_option("--dump-model", fit_dump, "write the fitted copula description");
  };
  auto* fit_cmd = app.add_subcommand("fit", "fit the estimator and predict");
  add_fit_options(fit_cmd);
  auto* predict_cmd = app.add_subcommand("predict", "alias of fit");
  add_fit_options(predict_cmd);

  // pe
  FitFlags pe_flags;
  std::vector<double> pe_taus;
  std::vector<std::string> pe_estimators;
  std::string pe_out = "pe";
  bool pe_serial = false;
  auto* pe_cmd =
      app.add_subcommand("pe", "cross-validated prediction error (times 10)");
  pe_cmd->add_option("--data", pe_flags.data_path, "input CSV (y,delta,x1,...,xd)")
      ->required();
  pe_cmd->add_option("--tau", pe_taus, "quantile level (repeatable)");
  pe_cmd->add_option("--estimator", pe_estimators,
                     "estimator spec MODE[:km|cox|none] (repeatable)");
  pe_cmd->add_option("--mode", pe_flags.mode, "copula mode (SP, P, NP)");
  pe_cmd->add_option("--censoring-model", pe_flags.censoring_model,
                     "censoring model (none, km, cox)");
  pe_cmd->add_option("--families", pe_flags.families,
                     "comma-separated candidate families");
  pe_cmd->add_option("--fraction", pe_flags.fraction,
                     "fixed nearest-neighbor bandwidth fraction");
  pe_cmd->add_option("--seed", pe_flags.seed, "seed")->required();
  pe_cmd->add_option("--out", pe_out, "output path prefix");
  pe_cmd->add_flag("--serial", pe_serial, "disable parallel folds");

  // dette-demo
  std::uint64_t dette_seed = 0;
  int dette_n = 500;
  double dette_tau = 0.5, dette_fraction = -1.0;
  std::string dette_out = "dette";
  bool dette_serial = false;
  auto* dette = app.add_subcommand(
      "dette-demo", "parametric vs nonparametric fit on the parabola example");
  dette->add_option("--seed", dette_seed, "seed")->required();
  dette->add_option("--n", dette_n, "sample size");
  dette->add_option("--tau", dette_tau, "quantile level");
  dette->add_option("--fraction", dette_fraction,
                    "fixed nearest-neighbor bandwidth fraction");
  dette->add_option("--out", dette_out, "output path prefix");
  dette->add_flag("--serial", dette_serial, "disable parallel fitting");

  std::vector<const char*> argv;
  argv.push_back("cqreg");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_dgp, sim_n, sim_censoring, sim_taus, sim_estimators,
                          sim_mode, sim_cens_model, sim_b, sim_seed, sim_out,
                          sim_families, sim_fraction, sim_serial, sim_export);
    if (fit_cmd->parsed() || predict_cmd->parsed())
      return cmd_fit_predict(fit_flags, fit_taus, fit_points, fit_at, fit_curve,
                             fit_out, fit_dump);
    if (pe_cmd->parsed())
      return cmd_pe(pe_flags, pe_taus, pe_estimators, pe_out, pe_serial);
    if (dette->parsed())
      return cmd_dette_demo(dette_seed, dette_n, dette_tau, dette_fraction, dette_out,
                            dette_serial);
  } catch (const CliError& e) {
    std::cerr << e.message << "\n";
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitFitFailure;
  }
  return kExitConfig;
}

}  // namespace cqreg

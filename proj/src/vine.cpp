#include "cqreg/vine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cqreg/stats.hpp"

namespace cqreg {

std::string mode_name(CopulaMode mode) {
  switch (mode) {
    case CopulaMode::SP:
      return "SP";
    case CopulaMode::P:
      return "P";
    case CopulaMode::NP:
      return "NP";
  }
  return "SP";
}

CopulaMode parse_mode(const std::string& text) {
  if (text == "SP") return CopulaMode::SP;
  if (text == "P") return CopulaMode::P;
  if (text == "NP") return CopulaMode::NP;
  throw std::invalid_argument("unknown copula mode: " + text);
}

PairCopulaModel PairCopulaModel::parametric(ParametricPair p) {
  PairCopulaModel m;
  m.kind = Kind::parametric;
  m.par = std::move(p);
  return m;
}

PairCopulaModel PairCopulaModel::nonparametric(DensityGrid g) {
  PairCopulaModel m;
  m.kind = Kind::grid;
  m.grid = std::move(g);
  return m;
}

double PairCopulaModel::density(double u, double v) const {
  return kind == Kind::parametric ? pair_density(par, u, v)
                                  : grid_copula_density(grid, u, v);
}

double PairCopulaModel::h_1given2(double u, double given_v) const {
  return kind == Kind::parametric ? pair_hfunc(par, u, given_v)
                                  : grid_hfunc_1given2(grid, u, given_v);
}

double PairCopulaModel::h_2given1(double v, double given_u) const {
  return kind == Kind::parametric ? pair_hfunc_2given1(par, v, given_u)
                                  : grid_hfunc(grid, v, given_u);
}

namespace {

constexpr double kCondClamp = 1e-10;

double clamp_cond(double x) {
  return std::min(std::max(x, kCondClamp), 1.0 - kCondClamp);
}

using EdgeFitter =
    std::function<PairCopulaModel(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

// working node during the sequential tree construction
struct FitNode {
  std::vector<int> union_set;  // sorted variables covered by this node
  int var1 = -1;               // conditioned pair of the edge it represents
  int var2 = -1;
  Eigen::VectorXd col1;        // data of var1 given union\{var1}
  Eigen::VectorXd col2;        // data of var2 given union\{var2}
  int prev_a = -1;             // indices of the previous-level nodes joined
  int prev_b = -1;
};

// maximum spanning tree (Prim) over the admissible pairs; returns edge list
std::vector<std::pair<int, int>> max_spanning_tree(
    int n, const std::vector<std::vector<double>>& weight,
    const std::vector<std::vector<bool>>& allowed) {
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  std::vector<std::pair<int, int>> edges;
  in_tree[0] = true;
  for (int added = 1; added < n; ++added) {
    double best = -1.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!in_tree[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < n; ++j) {
        if (in_tree[static_cast<std::size_t>(j)] ||
            !allowed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
          continue;
        if (weight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > best) {
          best = weight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
          bi = i;
          bj = j;
        }
      }
    }
    if (bj < 0)
      throw std::runtime_error("fit_vine: proximity graph is disconnected");
    in_tree[static_cast<std::size_t>(bj)] = true;
    edges.push_back({bi, bj});
  }
  return edges;
}

// variable of `node` outside the shared conditioning set, plus its column
std::pair<int, const Eigen::VectorXd*> conditioned_part(
    const FitNode& node, const std::vector<int>& shared) {
  const bool v1_shared =
      std::binary_search(shared.begin(), shared.end(), node.var1);
  if (!v1_shared) return {node.var1, &node.col1};
  return {node.var2, &node.col2};
}

VineStructure fit_rvine(const Eigen::MatrixXd& cols, const EdgeFitter& fit_edge) {
  const int k = static_cast<int>(cols.cols());
  VineStructure structure;
  structure.n_vars = k;
  if (k < 2) return structure;

  std::vector<FitNode> nodes(static_cast<std::size_t>(k));
  for (int v = 0; v < k; ++v) {
    auto& node = nodes[static_cast<std::size_t>(v)];
    node.union_set = {v};
    node.var1 = node.var2 = v;
    node.col1 = node.col2 = cols.col(v);
  }

  for (int level = 0; level < k - 1; ++level) {
    const int r = static_cast<int>(nodes.size());
    std::vector<std::vector<double>> weight(
        static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(r), 0.0));
    std::vector<std::vector<bool>> allowed(
        static_cast<std::size_t>(r), std::vector<bool>(static_cast<std::size_t>(r), false));
    for (int i = 0; i < r; ++i) {
      for (int j = i + 1; j < r; ++j) {
        const FitNode& a = nodes[static_cast<std::size_t>(i)];
        const FitNode& b = nodes[static_cast<std::size_t>(j)];
        bool ok = level == 0;
        if (!ok)
          ok = a.prev_a == b.prev_a || a.prev_a == b.prev_b ||
               a.prev_b == b.prev_a || a.prev_b == b.prev_b;
        if (!ok) continue;
        std::vector<int> shared;
        std::set_intersection(a.union_set.begin(), a.union_set.end(),
                              b.union_set.begin(), b.union_set.end(),
                              std::back_inserter(shared));
        const auto [va, ca] = conditioned_part(a, shared);
        const auto [vb, cb] = conditioned_part(b, shared);
        (void)va;
        (void)vb;
        double tau = 0.0;
        try {
          tau = std::abs(kendall_tau(*ca, *cb));
        } catch (const std::invalid_argument&) {
          tau = 0.0;  // constant column, treated as no dependence
        }
        weight[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = tau;
        weight[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = tau;
        allowed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
        allowed[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = true;
      }
    }

    const auto tree = max_spanning_tree(r, weight, allowed);
    std::vector<VineEdge> level_edges;
    std::vector<FitNode> next_nodes;
    for (const auto& [i, j] : tree) {
      const FitNode& a = nodes[static_cast<std::size_t>(i)];
      const FitNode& b = nodes[static_cast<std::size_t>(j)];
      std::vector<int> shared;
      std::set_intersection(a.union_set.begin(), a.union_set.end(),
                            b.union_set.begin(), b.union_set.end(),
                            std::back_inserter(shared));
      const auto [vx, cx] = conditioned_part(a, shared);
      const auto [vy, cy] = conditioned_part(b, shared);

      VineEdge edge;
      edge.var_a = vx;
      edge.var_b = vy;
      edge.cond = shared;
      try {
        edge.model = fit_edge(*cx, *cy);
      } catch (const std::exception& e) {
        throw std::runtime_error("fit_vine: edge (" + std::to_string(vx) + "," +
                                 std::to_string(vy) + " | level " +
                                 std::to_string(level + 1) + ") failed: " + e.what());
      }

      FitNode merged;
      std::set_union(a.union_set.begin(), a.union_set.end(), b.union_set.begin(),
                     b.union_set.end(), std::back_inserter(merged.union_set));
      merged.var1 = vx;
      merged.var2 = vy;
      merged.prev_a = i;
      merged.prev_b = j;
      const Eigen::Index n = cx->size();
      merged.col1.resize(n);
      merged.col2.resize(n);
      for (Eigen::Index t = 0; t < n; ++t) {
        merged.col1[t] = clamp_cond(edge.model.h_1given2((*cx)[t], (*cy)[t]));
        merged.col2[t] = clamp_cond(edge.model.h_2given1((*cy)[t], (*cx)[t]));
      }
      level_edges.push_back(std::move(edge));
      next_nodes.push_back(std::move(merged));
    }
    structure.levels.push_back(std::move(level_edges));
    nodes = std::move(next_nodes);
  }
  return structure;
}

}  // namespace

double VineStructure::density(const Eigen::VectorXd& point) const {
  if (n_vars < 2) return 1.0;
  if (point.size() != n_vars)
    throw std::invalid_argument("VineStructure::density: dimension mismatch");
  // slot (var, conditioning bitmask) -> transformed value
  const auto n_masks = static_cast<std::size_t>(1) << n_vars;
  std::vector<double> slot(static_cast<std::size_t>(n_vars) * n_masks, -1.0);
  auto at = [&](int var, unsigned mask) -> double& {
    return slot[static_cast<std::size_t>(var) * n_masks + mask];
  };
  for (int v = 0; v < n_vars; ++v) at(v, 0u) = clamp_cond(point[v]);

  double density = 1.0;
  for (const auto& level : levels) {
    for (const auto& edge : level) {
      unsigned mask = 0;
      for (int c : edge.cond) mask |= (1u << c);
      const double a = at(edge.var_a, mask);
      const double b = at(edge.var_b, mask);
      density *= edge.model.density(a, b);
      at(edge.var_a, mask | (1u << edge.var_b)) =
          clamp_cond(edge.model.h_1given2(a, b));
      at(edge.var_b, mask | (1u << edge.var_a)) =
          clamp_cond(edge.model.h_2given1(b, a));
    }
  }
  return density;
}

Eigen::VectorXd conditional_pseudo(const Eigen::VectorXd& pseudo_u0,
                                   const Eigen::VectorXd& pseudo_xj,
                                   const PairCopulaModel& interest_pair) {
  if (pseudo_u0.size() != pseudo_xj.size())
    throw std::invalid_argument("conditional_pseudo: length mismatch");
  Eigen::VectorXd out(pseudo_u0.size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = clamp_cond(interest_pair.h_2given1(pseudo_xj[i], pseudo_u0[i]));
  return out;
}

VineCopulaModel fit_vine(const Eigen::VectorXd& pseudo_u0,
                         const Eigen::MatrixXd& pseudo_x, const VineConfig& config) {
  const Eigen::Index n = pseudo_u0.size();
  const int d = static_cast<int>(pseudo_x.cols());
  if (pseudo_x.rows() != n) throw std::invalid_argument("fit_vine: row mismatch");
  if (n < 30) throw std::invalid_argument("fit_vine: need at least 30 observations");
  if (d < 1) throw std::invalid_argument("fit_vine: need at least one covariate");

  VineCopulaModel model;
  model.d = d;
  model.mode = config.mode;

  const EdgeFitter parametric_fitter = [&](const Eigen::VectorXd& a,
                                           const Eigen::VectorXd& b) {
    return PairCopulaModel::parametric(select_pair_aic(a, b, config.candidates));
  };
  const EdgeFitter grid_fitter = [&](const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b) {
    return PairCopulaModel::nonparametric(fit_probit_ll(a, b, config.smoother));
  };

  if (config.mode == CopulaMode::P) {
    Eigen::MatrixXd cols(n, d + 1);
    cols.col(0) = pseudo_u0;
    cols.rightCols(d) = pseudo_x;
    model.joint = fit_rvine(cols, parametric_fitter);
    return model;
  }

  // SP / NP: the first tree is pinned to the response-covariate pairs
  model.interest.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    try {
      model.interest.push_back(grid_fitter(pseudo_u0, pseudo_x.col(j)));
    } catch (const std::exception& e) {
      throw std::runtime_error("fit_vine: interest pair " + std::to_string(j + 1) +
                               " failed: " + e.what());
    }
  }
  if (d >= 2) {
    Eigen::MatrixXd cond(n, d);
    for (int j = 0; j < d; ++j)
      cond.col(j) = conditional_pseudo(pseudo_u0, pseudo_x.col(j),
                                       model.interest[static_cast<std::size_t>(j)]);
    model.noisy = fit_rvine(
        cond, config.mode == CopulaMode::NP ? grid_fitter : parametric_fitter);
  }
  return model;
}

double eval_copula_density(const VineCopulaModel& model, double u0,
                           const Eigen::VectorXd& u) {
  if (u.size() != model.d)
    throw std::invalid_argument("eval_copula_density: dimension mismatch");
  if (model.mode == CopulaMode::P) {
    Eigen::VectorXd point(model.d + 1);
    point[0] = u0;
    point.tail(model.d) = u;
    return model.joint.density(point);
  }
  double density = 1.0;
  Eigen::VectorXd cond(model.d);
  for (int j = 0; j < model.d; ++j) {
    const auto& pair = model.interest[static_cast<std::size_t>(j)];
    density *= pair.density(u0, u[j]);
    cond[j] = clamp_cond(pair.h_2given1(u[j], u0));
  }
  if (model.d >= 2) density *= model.noisy.density(cond);
  return density;
}

namespace {

nlohmann::json pair_to_json(const PairCopulaModel& pair) {
  nlohmann::json j;
  if (pair.kind == PairCopulaModel::Kind::parametric) {
    j["kind"] = "parametric";
    j["family"] = family_name(pair.par.family);
    j["theta"] = pair.par.theta;
    j["loglik"] = pair.par.loglik;
    j["aic"] = pair.par.aic;
  } else {
    j["kind"] = "grid";
    j["m"] = pair.grid.m;
    j["z_max"] = pair.grid.z_max;
    j["bandwidth"] = pair.grid.bandwidth;
    j["normalization"] = pair.grid.normalization;
    j["fallback_nodes"] = pair.grid.fallback_nodes;
  }
  return j;
}

nlohmann::json structure_to_json(const VineStructure& s) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : s.levels) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& edge : level) {
      nlohmann::json je;
      je["conditioned"] = {edge.var_a, edge.var_b};
      je["conditioning"] = edge.cond;
      je["model"] = pair_to_json(edge.model);
      edges.push_back(je);
    }
    levels.push_back(edges);
  }
  return levels;
}

}  // namespace

std::string describe_vine(const VineCopulaModel& model) {
  nlohmann::json j;
  j["mode"] = mode_name(model.mode);
  j["d"] = model.d;
  if (model.mode == CopulaMode::P) {
    j["joint"] = structure_to_json(model.joint);
  } else {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : model.interest) pairs.push_back(pair_to_json(p));
    j["interest"] = pairs;
    j["noisy"] = structure_to_json(model.noisy);
  }
  return j.dump(2);
}

}  // namespace cqreg

#include "cqreg/paircop.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "cqreg/stats.hpp"

namespace cqreg {

namespace {

double clamp_u(double u) { return std::min(std::max(u, kEpsU), 1.0 - kEpsU); }

// log-densities of the base (unrotated) families

double log_density_gaussian(double u, double v, double rho) {
  const double z1 = std_normal_quantile(u);
  const double z2 = std_normal_quantile(v);
  const double r2 = rho * rho;
  return -0.5 * std::log1p(-r2) -
         (r2 * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * (1.0 - r2));
}

double log_density_clayton(double u, double v, double theta) {
  const double lu = std::log(u), lv = std::log(v);
  const double s = std::exp(-theta * lu) + std::exp(-theta * lv) - 1.0;
  if (s <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log1p(theta) - (1.0 + theta) * (lu + lv) -
         (2.0 + 1.0 / theta) * std::log(s);
}

double log_density_gumbel(double u, double v, double theta) {
  const double a = -std::log(u), b = -std::log(v);
  const double s = std::pow(a, theta) + std::pow(b, theta);
  const double s1t = std::pow(s, 1.0 / theta);
  return -s1t + (theta - 1.0) * (std::log(a) + std::log(b)) +
         (1.0 / theta - 2.0) * std::log(s) + std::log(s1t + theta - 1.0) + a + b;
}

// D = exp(-theta*u) + exp(-theta*v) - exp(-theta) - exp(-theta*(u+v));
// positive for theta > 0, negative for theta < 0
double frank_denominator(double u, double v, double theta) {
  return std::exp(-theta * u) + std::exp(-theta * v) - std::exp(-theta) -
         std::exp(-theta * (u + v));
}

double log_density_frank(double u, double v, double theta) {
  if (std::abs(theta) < 1e-8) return 0.0;
  const double d = frank_denominator(u, v, theta);
  const double num = theta * (-std::expm1(-theta)) * std::exp(-theta * (u + v));
  return std::log(num) - 2.0 * std::log(std::abs(d));
}

double log_density_joe(double u, double v, double theta) {
  const double la = theta * std::log1p(-u), lb = theta * std::log1p(-v);
  const double a = std::exp(la), b = std::exp(lb);
  const double s = a + b - a * b;
  if (s <= 0.0) return -std::numeric_limits<double>::infinity();
  return (theta - 1.0) * (std::log1p(-u) + std::log1p(-v)) +
         (1.0 / theta - 2.0) * std::log(s) + std::log(theta - 1.0 + s);
}

double base_log_density(FamilyTag tag, double u, double v, double theta) {
  switch (tag) {
    case FamilyTag::independence:
      return 0.0;
    case FamilyTag::gaussian:
      return log_density_gaussian(u, v, theta);
    case FamilyTag::clayton:
      return log_density_clayton(u, v, theta);
    case FamilyTag::gumbel:
      return log_density_gumbel(u, v, theta);
    case FamilyTag::frank:
      return log_density_frank(u, v, theta);
    case FamilyTag::joe:
      return log_density_joe(u, v, theta);
  }
  return 0.0;
}

// base conditional CDF h(u | v) = dC(u,v)/dv; all base families are
// exchangeable so the same function serves both directions
double base_hfunc(FamilyTag tag, double u, double v, double theta) {
  switch (tag) {
    case FamilyTag::independence:
      return u;
    case FamilyTag::gaussian: {
      const double z1 = std_normal_quantile(u);
      const double z2 = std_normal_quantile(v);
      return std_normal_cdf((z1 - theta * z2) / std::sqrt(1.0 - theta * theta));
    }
    case FamilyTag::clayton: {
      const double s =
          std::exp(-theta * std::log(u)) + std::exp(-theta * std::log(v)) - 1.0;
      return std::exp(-(theta + 1.0) * std::log(v) -
                      (1.0 + 1.0 / theta) * std::log(s));
    }
    case FamilyTag::gumbel: {
      const double a = -std::log(u), b = -std::log(v);
      const double s = std::pow(a, theta) + std::pow(b, theta);
      const double s1t = std::pow(s, 1.0 / theta);
      return std::exp(-s1t + (1.0 / theta - 1.0) * std::log(s) +
                      (theta - 1.0) * std::log(b) + b);
    }
    case FamilyTag::frank: {
      if (std::abs(theta) < 1e-8) return u;
      const double d = frank_denominator(u, v, theta);
      return std::exp(-theta * v) * (-std::expm1(-theta * u)) / d;
    }
    case FamilyTag::joe: {
      const double a = std::exp(theta * std::log1p(-u));
      const double b = std::exp(theta * std::log1p(-v));
      const double s = a + b - a * b;
      return std::exp((1.0 / theta - 1.0) * std::log(s) +
                      (theta - 1.0) * std::log1p(-v)) *
             (1.0 - a);
    }
  }
  return u;
}

double clamp_p(double p) { return std::min(std::max(p, 0.0), 1.0); }

}  // namespace

double pair_density(const ParametricPair& pair, double u, double v) {
  u = clamp_u(u);
  v = clamp_u(v);
  const FamilyTag tag = pair.family.tag;
  if (tag == FamilyTag::independence) return 1.0;
  double a = u, b = v;
  switch (pair.family.rotation) {
    case 90:
      a = v;
      b = 1.0 - u;
      break;
    case 180:
      a = 1.0 - u;
      b = 1.0 - v;
      break;
    case 270:
      a = 1.0 - v;
      b = u;
      break;
    default:
      break;
  }
  const double logc = base_log_density(tag, a, b, pair.theta);
  return std::isfinite(logc) ? std::exp(logc) : 0.0;
}

double pair_hfunc(const ParametricPair& pair, double u, double given_v) {
  u = clamp_u(u);
  const double v = clamp_u(given_v);
  const FamilyTag tag = pair.family.tag;
  if (tag == FamilyTag::independence) return u;
  const double th = pair.theta;
  double h;
  switch (pair.family.rotation) {
    case 90:
      h = 1.0 - base_hfunc(tag, 1.0 - u, v, th);
      break;
    case 180:
      h = 1.0 - base_hfunc(tag, 1.0 - u, 1.0 - v, th);
      break;
    case 270:
      h = base_hfunc(tag, u, 1.0 - v, th);
      break;
    default:
      h = base_hfunc(tag, u, v, th);
      break;
  }
  return clamp_p(h);
}

double pair_hfunc_2given1(const ParametricPair& pair, double v, double given_u) {
  v = clamp_u(v);
  const double u = clamp_u(given_u);
  const FamilyTag tag = pair.family.tag;
  if (tag == FamilyTag::independence) return v;
  const double th = pair.theta;
  double h;
  switch (pair.family.rotation) {
    case 90:
      h = base_hfunc(tag, v, 1.0 - u, th);
      break;
    case 180:
      h = 1.0 - base_hfunc(tag, 1.0 - v, 1.0 - u, th);
      break;
    case 270:
      h = 1.0 - base_hfunc(tag, 1.0 - v, u, th);
      break;
    default:
      h = base_hfunc(tag, v, u, th);
      break;
  }
  return clamp_p(h);
}

ThetaInterval admissible_interval(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::independence:
      return {0.0, 0.0};
    case FamilyTag::gaussian:
      return {-0.9999, 0.9999};
    case FamilyTag::clayton:
      return {1e-4, 28.0};
    case FamilyTag::gumbel:
      return {1.0 + 1e-8, 17.0};
    case FamilyTag::frank:
      return {-35.0, 35.0};
    case FamilyTag::joe:
      return {1.0 + 1e-8, 30.0};
  }
  return {0.0, 0.0};
}

std::string family_name(const PairFamily& family) {
  std::string base;
  switch (family.tag) {
    case FamilyTag::independence:
      return "independence";
    case FamilyTag::gaussian:
      base = "gaussian";
      break;
    case FamilyTag::clayton:
      base = "clayton";
      break;
    case FamilyTag::gumbel:
      base = "gumbel";
      break;
    case FamilyTag::frank:
      base = "frank";
      break;
    case FamilyTag::joe:
      base = "joe";
      break;
  }
  if (family.rotation != 0) base += std::to_string(family.rotation);
  return base;
}

PairFamily parse_family(const std::string& text) {
  std::string base = text;
  int rotation = 0;
  for (int rot : {90, 180, 270}) {
    const std::string suffix = std::to_string(rot);
    if (text.size() > suffix.size() &&
        text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0) {
      base = text.substr(0, text.size() - suffix.size());
      rotation = rot;
      break;
    }
  }
  FamilyTag tag;
  if (base == "independence")
    tag = FamilyTag::independence;
  else if (base == "gaussian")
    tag = FamilyTag::gaussian;
  else if (base == "clayton")
    tag = FamilyTag::clayton;
  else if (base == "gumbel")
    tag = FamilyTag::gumbel;
  else if (base == "frank")
    tag = FamilyTag::frank;
  else if (base == "joe")
    tag = FamilyTag::joe;
  else
    throw std::invalid_argument("unknown copula family: " + text);
  if (tag == FamilyTag::independence && rotation != 0)
    throw std::invalid_argument("independence admits no rotation");
  return {tag, rotation};
}

namespace {

double loglik_at(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                 const PairFamily& family, double theta) {
  ParametricPair p{family, theta, 0.0, 0.0, false};
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double c = pair_density(p, u[i], v[i]);
    if (!(c > 0.0) || !std::isfinite(c))
      return -std::numeric_limits<double>::infinity();
    total += std::log(c);
  }
  return total;
}

}  // namespace

ParametricPair fit_pair_ml(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                           PairFamily family) {
  if (u.size() != v.size())
    throw std::invalid_argument("fit_pair_ml: length mismatch");
  if (u.size() < 10)
    throw std::invalid_argument("fit_pair_ml: need at least 10 observations");

  if (family.tag == FamilyTag::independence)
    return {family, 0.0, 0.0, 0.0, false};

  const ThetaInterval iv = admissible_interval(family.tag);
  auto f = [&](double theta) { return loglik_at(u, v, family, theta); };

  // golden-section maximization to interval width < 1e-9
  const double gr = 0.6180339887498949;
  double lo = iv.lo, hi = iv.hi;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    }
  }
  double theta = 0.5 * (lo + hi);
  double best = f(theta);
  if (!std::isfinite(best))
    throw std::runtime_error("fit_pair_ml: log-likelihood is degenerate for family " +
                             family_name(family));

  // one guarded Newton polish on the numeric score
  {
    const double h = 1e-6 * std::max(1.0, std::abs(theta));
    const double fp = f(theta + h), fm = f(theta - h);
    const double score = (fp - fm) / (2.0 * h);
    const double curv = (fp - 2.0 * best + fm) / (h * h);
    if (std::isfinite(score) && std::isfinite(curv) && curv < 0.0) {
      const double cand = std::min(std::max(theta - score / curv, iv.lo), iv.hi);
      const double fc = f(cand);
      if (fc > best) {
        theta = cand;
        best = fc;
      }
    }
  }

  ParametricPair fit{family, theta, best, -2.0 * best + 2.0, false};
  const double guard = 1e-6 * (iv.hi - iv.lo);
  const bool at_lo = theta <= iv.lo + guard;
  const bool at_hi = theta >= iv.hi - guard;
  if (at_lo || at_hi) {
    fit.at_boundary = true;
    // the lower boundary of clayton/gumbel/joe is the independence limit and
    // a routine outcome during selection; only strong-dependence saturation
    // is worth a warning
    const bool lo_is_independence = family.tag == FamilyTag::clayton ||
                                    family.tag == FamilyTag::gumbel ||
                                    family.tag == FamilyTag::joe;
    if (at_hi || !lo_is_independence)
      std::cerr << "[cqreg] warning: " << family_name(family)
                << " fit stopped at the admissible boundary (theta = " << theta
                << ")\n";
  }
  return fit;
}

ParametricPair select_pair_aic(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                               const std::vector<PairFamily>& candidates) {
  if (candidates.empty())
    throw std::invalid_argument("select_pair_aic: empty candidate list");
  bool have_best = false;
  ParametricPair best;
  std::ostringstream failures;
  for (const PairFamily& family : candidates) {
    try {
      ParametricPair fit = fit_pair_ml(u, v, family);
      if (!have_best || fit.aic < best.aic) {
        best = fit;
        have_best = true;
      }
    } catch (const std::exception& e) {
      failures << family_name(family) << ": " << e.what() << "; ";
    }
  }
  if (!have_best)
    throw std::runtime_error("select_pair_aic: every candidate failed (" +
                             failures.str() + ")");
  return best;
}

std::vector<PairFamily> default_candidate_families() {
  std::vector<PairFamily> out;
  out.push_back({FamilyTag::independence, 0});
  out.push_back({FamilyTag::gaussian, 0});
  out.push_back({FamilyTag::frank, 0});
  for (FamilyTag tag : {FamilyTag::clayton, FamilyTag::gumbel, FamilyTag::joe})
    for (int rot : {0, 90, 180, 270}) out.push_back({tag, rot});
  return out;
}

}  // namespace cqreg

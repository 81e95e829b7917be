#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fastrates/conditions.hpp"
#include "fastrates/divergences.hpp"
#include "fastrates/mc.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

struct QuadGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Trapezoid rule on n equally spaced nodes.
inline QuadGrid uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("uniform_grid: need n >= 2 and hi > lo");
  QuadGrid g;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back(lo + h * static_cast<double>(i));
    g.weights.push_back(i == 0 || i + 1 == n ? h / 2.0 : h);
  }
  return g;
}

// Counting measure on {lo, ..., hi}.
inline QuadGrid integer_grid(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("integer_grid: empty range");
  QuadGrid g;
  for (int y = lo; y <= hi; ++y) {
    g.nodes.push_back(y);
    g.weights.push_back(1.0);
  }
  return g;
}

// A distribution carried by grid nodes; mass sums to one, defect is what the raw
// quadrature lost before renormalizing.
struct GridDistribution {
  QuadGrid grid;
  std::vector<double> mass;
  double defect = 0.0;

  double mean() const { return expect(mass, grid.nodes); }
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) s += mass[i] * (grid.nodes[i] - m) * (grid.nodes[i] - m);
    return s;
  }
};

inline GridDistribution grid_distribution(QuadGrid grid, std::span<const double> density) {
  if (density.size() != grid.nodes.size()) throw std::invalid_argument("grid_distribution: size mismatch");
  GridDistribution d;
  d.mass.resize(density.size());
  double s = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (!(density[i] >= 0.0)) throw std::domain_error("grid_distribution: negative or NaN density");
    s += (d.mass[i] = grid.weights[i] * density[i]);
  }
  if (!(s > 0.0)) throw std::domain_error("grid_distribution: zero mass");
  for (auto& m : d.mass) m /= s;
  d.defect = 1.0 - s;
  d.grid = std::move(grid);
  return d;
}

// N(mean, sd^2) on `nodes` equally spaced points over mean +- width sd.
inline GridDistribution gaussian_on_grid(double mean, double sd, std::size_t nodes = 401, double width = 12.0) {
  if (!(sd > 0.0)) throw std::domain_error("gaussian_on_grid: sd must be positive");
  QuadGrid g = uniform_grid(mean - width * sd, mean + width * sd, nodes);
  std::vector<double> dens(g.nodes.size());
  for (std::size_t i = 0; i < dens.size(); ++i) {
    double z = (g.nodes[i] - mean) / sd;
    dens[i] = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
  }
  return grid_distribution(std::move(g), dens);
}

// p_theta(y) = exp(theta y - F(theta) + r(y)) on a closed parameter interval.
struct ExpFamily {
  std::string name;
  std::function<double(double)> F, dF, d2F;
  std::function<double(double)> carrier;
  double lo = 0.0, hi = 0.0;
  QuadGrid base_grid;
  std::function<double(double)> mean_inverse;            // optional closed form of (F')^{-1}
  std::function<double(double, double)> bregman_closed;  // optional F(a) - F(b) - F'(b)(a - b)

  bool contains(double theta) const { return theta >= lo && theta <= hi; }

  double bregman(double a, double b) const {
    if (bregman_closed) return bregman_closed(a, b);
    return F(a) - F(b) - dF(b) * (a - b);
  }

  double natural_from_mean(double m) const {
    if (mean_inverse) {
      double t = mean_inverse(m);
      if (!contains(t)) throw std::domain_error(name + ": mean outside the image of the parameter interval");
      return t;
    }
    double a = lo, b = hi;
    if (!(dF(a) <= m && m <= dF(b))) throw std::domain_error(name + ": mean outside the image of the parameter interval");
    for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
      double c = 0.5 * (a + b);
      (dF(c) < m ? a : b) = c;
    }
    return 0.5 * (a + b);
  }
};

struct IneccsiReport {
  double inf_F = inf, sup_F = -inf;
  double inf_dF = inf, sup_dF = -inf;
  double inf_d2F = inf, sup_d2F = -inf;
  bool mean_increasing = true;
  bool holds = false;
};

inline IneccsiReport check_ineccsi(const ExpFamily& fam, std::size_t points = 1001) {
  if (!(fam.hi > fam.lo)) throw std::domain_error("check_ineccsi: empty interval");
  IneccsiReport r;
  double prev = -inf;
  for (std::size_t i = 0; i < points; ++i) {
    double t = fam.lo + (fam.hi - fam.lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    double f = fam.F(t), d = fam.dF(t), dd = fam.d2F(t);
    r.inf_F = std::min(r.inf_F, f);
    r.sup_F = std::max(r.sup_F, f);
    r.inf_dF = std::min(r.inf_dF, d);
    r.sup_dF = std::max(r.sup_dF, d);
    r.inf_d2F = std::min(r.inf_d2F, dd);
    r.sup_d2F = std::max(r.sup_d2F, dd);
    if (!(d > prev)) r.mean_increasing = false;
    prev = d;
  }
  r.holds = std::isfinite(r.inf_F) && std::isfinite(r.sup_F) && std::isfinite(r.inf_dF) && std::isfinite(r.sup_dF) &&
            r.inf_d2F > 0.0 && std::isfinite(r.sup_d2F) && r.mean_increasing;
  return r;
}

// Gaussian location with model variance s2: F(theta) = theta^2 s2 / 2, mean theta s2.
inline ExpFamily gaussian_location(double sigma_star, double lo, double hi) {
  if (!(sigma_star > 0.0)) throw std::domain_error("gaussian_location: sigma_star must be positive");
  if (!(hi > lo)) throw std::domain_error("gaussian_location: empty interval");
  const double s2 = sigma_star * sigma_star;
  ExpFamily f;
  f.name = "gaussian_location";
  f.F = [s2](double t) { return 0.5 * t * t * s2; };
  f.dF = [s2](double t) { return t * s2; };
  f.d2F = [s2](double) { return s2; };
  f.carrier = [s2](double y) { return -0.5 * y * y / s2 - 0.5 * std::log(2.0 * std::numbers::pi * s2); };
  f.lo = lo;
  f.hi = hi;
  f.mean_inverse = [s2](double m) { return m / s2; };
  f.bregman_closed = [s2](double a, double b) { return 0.5 * s2 * (a - b) * (a - b); };
  const double reach = std::max(std::abs(lo), std::abs(hi)) * s2 + 12.0 * sigma_star;
  f.base_grid = uniform_grid(-reach, reach, 401);
  return f;
}

inline ExpFamily bernoulli_family(double lo, double hi) {
  if (!(hi > lo)) throw std::domain_error("bernoulli_family: empty interval");
  ExpFamily f;
  f.name = "bernoulli";
  f.F = [](double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); };
  f.dF = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  f.d2F = [](double t) {
    double s = 1.0 / (1.0 + std::exp(-t));
    return s * (1.0 - s);
  };
  f.carrier = [](double) { return 0.0; };
  f.lo = lo;
  f.hi = hi;
  f.mean_inverse = [](double m) { return std::log(m / (1.0 - m)); };
  f.base_grid = integer_grid(0, 1);
  return f;
}

// Poisson on {0, ..., ymax}; F is the untruncated log-partition, so densities carry a
// small truncation defect that is recorded and removed.
inline ExpFamily poisson_family(double lo, double hi, int ymax = 200) {
  if (!(hi > lo)) throw std::domain_error("poisson_family: empty interval");
  ExpFamily f;
  f.name = "poisson";
  f.F = [](double t) { return std::exp(t); };
  f.dF = [](double t) { return std::exp(t); };
  f.d2F = [](double t) { return std::exp(t); };
  f.carrier = [](double y) { return -std::lgamma(y + 1.0); };
  f.lo = lo;
  f.hi = hi;
  f.mean_inverse = [](double m) { return std::log(m); };
  f.base_grid = integer_grid(0, ymax);
  return f;
}

inline double expfam_log_density(const ExpFamily& fam, double theta, double y) {
  return theta * y - fam.F(theta) + fam.carrier(y);
}

inline GridDistribution expfam_density(const ExpFamily& fam, double theta, const QuadGrid& grid) {
  if (!fam.contains(theta)) throw std::domain_error("expfam_density: theta outside the parameter interval");
  std::vector<double> dens(grid.nodes.size());
  for (std::size_t i = 0; i < dens.size(); ++i) dens[i] = std::exp(expfam_log_density(fam, theta, grid.nodes[i]));
  return grid_distribution(grid, dens);
}

inline GridDistribution expfam_density(const ExpFamily& fam, double theta) { return expfam_density(fam, theta, fam.base_grid); }

// theta* with F'(theta*) = E_P[Y].
inline double expfam_projection(const ExpFamily& fam, const GridDistribution& P) {
  return fam.natural_from_mean(P.mean());
}

// log E_P[exp(lambda (Y - m))] with m = E_P[Y]
inline double centered_log_mgf(const GridDistribution& P, double lambda) {
  const double m = P.mean();
  std::vector<double> x(P.mass.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = lambda * (P.grid.nodes[i] - m);
  return log_mean_exp(P.mass, x);
}

struct CentralMoment {
  double closed_form = 0.0;   // via the log-partition and the MGF of P
  double direct = 0.0;        // sum_y P(y) (p_theta / p_theta*)^eta
  double log_moment = 0.0;
};

// E_P[exp(-eta (loss_theta - loss_theta*))] for log loss; theta* = projection of P.
inline CentralMoment central_moment_expfam(const ExpFamily& fam, const GridDistribution& P, double theta, double eta,
                                           std::optional<double> theta_star = std::nullopt) {
  if (!(eta > 0.0)) throw std::domain_error("central_moment_expfam: eta must be positive");
  const double ts = theta_star ? *theta_star : expfam_projection(fam, P);
  const double d = theta - ts;
  // -eta [F(theta) - F(theta*) - m d] + log E exp(eta d (Y - m)), m = F'(theta*)
  const double mean_gap = P.mean() - fam.dF(ts);
  CentralMoment c;
  c.log_moment = -eta * fam.bregman(theta, ts) + eta * d * mean_gap + centered_log_mgf(P, eta * d);
  c.closed_form = std::exp(c.log_moment);
  double s = 0.0;
  for (std::size_t i = 0; i < P.mass.size(); ++i)
    s += P.mass[i] * std::exp(eta * (d * P.grid.nodes[i] - fam.F(theta) + fam.F(ts)));
  c.direct = s;
  return c;
}

struct ThresholdReport {
  double theta_star = 0.0;
  double eta_bar = 0.0;       // largest certified eta on the theta grid
  double worst_theta = 0.0;   // maximizer of the moment just above eta_bar
  std::size_t thetas = 0;
  double grid_defect = 0.0;
  double model_variance = 0.0;  // (sigma*)^2 = F''(theta*)
  double true_variance = 0.0;
  double variance_ratio = 0.0;
};

// Largest eta with max_theta log E[exp(-eta L_theta)] <= tol over the given thetas.
inline ThresholdReport central_threshold(const ExpFamily& fam, const GridDistribution& P, std::span<const double> thetas,
                                         double cap = 1e3, double rel_tol = 1e-10, double tol = 1e-13) {
  if (thetas.empty()) throw std::invalid_argument("central_threshold: empty theta grid");
  ThresholdReport r;
  r.theta_star = expfam_projection(fam, P);
  r.thetas = thetas.size();
  r.grid_defect = P.defect;
  r.model_variance = fam.d2F(r.theta_star);
  r.true_variance = P.variance();
  r.variance_ratio = r.true_variance > 0.0 ? r.model_variance / r.true_variance : inf;
  auto worst = [&](double eta, double* arg) {
    double w = -inf;
    for (double t : thetas) {
      if (t == r.theta_star) continue;
      double l = central_moment_expfam(fam, P, t, eta, r.theta_star).log_moment;
      if (l > w) {
        w = l;
        if (arg) *arg = t;
      }
    }
    return w;
  };
  auto ok = [&](double eta) { return worst(eta, nullptr) <= tol; };
  double lo = 0.0, hi = 1.0;
  while (ok(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) {
      r.eta_bar = cap;
      return r;
    }
  }
  while (!ok(hi / 2.0) && hi > 1e-12) hi /= 2.0;
  lo = hi / 2.0;
  if (!ok(lo)) {
    r.eta_bar = 0.0;
    return r;
  }
  r.eta_bar = bisect_last_true(ok, lo, hi, rel_tol);
  worst(r.eta_bar * (1.0 + 1e-6), &r.worst_theta);
  return r;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

struct LocalLimitPoint {
  double radius = 0.0;
  double eta_bar = 0.0;
};

// Certified threshold on [theta* - r, theta* + r] for each radius; tends to
// (sigma*)^2 / sigma^2 as r shrinks.
inline std::vector<LocalLimitPoint> local_limit_sweep(const ExpFamily& fam, const GridDistribution& P,
                                                      std::span<const double> radii, std::size_t points = 41) {
  const double ts = expfam_projection(fam, P);
  std::vector<LocalLimitPoint> out;
  for (double rad : radii) {
    auto th = linspace(std::max(fam.lo, ts - rad), std::min(fam.hi, ts + rad), points);
    out.push_back({rad, central_threshold(fam, P, th).eta_bar});
  }
  return out;
}

// A log-loss finite problem: outcomes are the nodes of P, predictors the thetas.
inline FiniteProblem expfam_problem(const ExpFamily& fam, const GridDistribution& P, std::span<const double> thetas) {
  Matrix loss(thetas.size(), P.mass.size());
  std::vector<std::string> labels;
  for (std::size_t f = 0; f < thetas.size(); ++f) {
    if (!fam.contains(thetas[f])) throw std::domain_error("expfam_problem: theta outside the parameter interval");
    for (std::size_t z = 0; z < P.mass.size(); ++z) loss(f, z) = -expfam_log_density(fam, thetas[f], P.grid.nodes[z]);
    labels.push_back("theta=" + std::to_string(thetas[f]));
  }
  FiniteProblem pr;
  pr.probs = P.mass;
  pr.loss = std::move(loss);
  pr.labels = std::move(labels);
  validate(pr);
  return pr;
}

// ---- generalized linear models ----

struct GlmSpec {
  ExpFamily family;
  std::function<double(double)> inverse_link;
  std::function<double(double)> inverse_link_derivative;
  std::vector<std::vector<double>> design;  // x vectors
  std::vector<double> design_probs;
  std::vector<std::vector<double>> beta_grid;

  double linear(const std::vector<double>& beta, std::size_t x) const {
    const auto& xv = design.at(x);
    if (beta.size() > xv.size()) throw std::invalid_argument("GlmSpec: beta longer than x");
    double s = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * xv[i];
    return s;
  }
  double theta(const std::vector<double>& beta, std::size_t x) const {
    return family.natural_from_mean(inverse_link(linear(beta, x)));
  }
};

inline GlmSpec identity_link_glm(ExpFamily fam, std::vector<std::vector<double>> design, std::vector<double> probs,
                                 std::vector<std::vector<double>> beta_grid) {
  GlmSpec g{std::move(fam), [](double s) { return s; }, [](double) { return 1.0; }, std::move(design), std::move(probs),
            std::move(beta_grid)};
  return g;
}

// Conditional laws of Y given each design point on a common grid.
struct GlmTruth {
  std::vector<GridDistribution> conditional;
  bool mean_well_specified = false;  // built so that E[Y|x] = g^{-1}(<beta0, x>)
  std::optional<std::vector<double>> beta0;
};

struct GlmConditions {
  bool link_ok = false;        // bounded derivative and image inside the mean interval
  double sup_link_derivative = 0.0;
  bool mgf_ok = false;         // sup_x E[exp(eta |Y|) | x] finite
  double sup_conditional_mgf = 0.0;
  double mgf_eta = 0.0;
  bool mean_ok = false;        // some beta in the grid reproduces E[Y|x]
  std::optional<std::size_t> beta_star;
  double mean_residual = inf;
  std::vector<std::string> failures;
};

inline GlmConditions check_glm_conditions(const GlmSpec& glm, const GlmTruth& truth, double mgf_eta = 0.1,
                                          double mean_tol = 1e-8) {
  if (truth.conditional.size() != glm.design.size()) throw std::invalid_argument("check_glm_conditions: one law per design point");
  GlmConditions c;
  c.mgf_eta = mgf_eta;
  const double mlo = glm.family.dF(glm.family.lo), mhi = glm.family.dF(glm.family.hi);
  c.link_ok = true;
  for (const auto& b : glm.beta_grid)
    for (std::size_t x = 0; x < glm.design.size(); ++x) {
      double s = glm.linear(b, x);
      double d = std::abs(glm.inverse_link_derivative(s));
      double m = glm.inverse_link(s);
      c.sup_link_derivative = std::max(c.sup_link_derivative, d);
      if (!std::isfinite(d) || !(m > mlo && m < mhi)) c.link_ok = false;
    }
  if (!c.link_ok) c.failures.push_back("condition 1: inverse link leaves the interior mean interval or has unbounded slope");
  c.sup_conditional_mgf = 0.0;
  for (const auto& P : truth.conditional) {
    double s = 0.0;
    for (std::size_t i = 0; i < P.mass.size(); ++i) s += P.mass[i] * std::exp(mgf_eta * std::abs(P.grid.nodes[i]));
    c.sup_conditional_mgf = std::max(c.sup_conditional_mgf, s);
  }
  c.mgf_ok = std::isfinite(c.sup_conditional_mgf);
  if (!c.mgf_ok) c.failures.push_back("condition 2: conditional exponential moment is infinite");
  for (std::size_t b = 0; b < glm.beta_grid.size(); ++b) {
    double worst = 0.0;
    for (std::size_t x = 0; x < glm.design.size(); ++x)
      worst = std::max(worst, std::abs(truth.conditional[x].mean() - glm.inverse_link(glm.linear(glm.beta_grid[b], x))));
    if (worst < c.mean_residual) {
      c.mean_residual = worst;
      c.beta_star = b;
    }
  }
  c.mean_ok = c.mean_residual <= mean_tol;
  if (!c.mean_ok) c.failures.push_back("condition 3: no grid beta reproduces the conditional mean");
  return c;
}

struct GlmRiskIdentity {
  double risk_under_P = 0.0;
  double risk_under_Pstar = 0.0;
  double gap = 0.0;
};

// E_P[L_beta] and E_{P_beta*}[L_beta], both by quadrature on the conditional grids.
inline GlmRiskIdentity glm_risk_identity(const GlmSpec& glm, const GlmTruth& truth, const std::vector<double>& beta) {
  if (!truth.mean_well_specified || !truth.beta0)
    throw std::domain_error("glm_risk_identity: truth not built with a well-specified conditional mean");
  GlmRiskIdentity r;
  for (std::size_t x = 0; x < glm.design.size(); ++x) {
    const auto& P = truth.conditional.at(x);
    const double ts = glm.theta(*truth.beta0, x), t = glm.theta(beta, x);
    const GridDistribution Ps = expfam_density(glm.family, ts, P.grid);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < P.mass.size(); ++i) {
      const double y = P.grid.nodes[i];
      const double L = (ts - t) * y - glm.family.F(ts) + glm.family.F(t);
      a += P.mass[i] * L;
      b += Ps.mass[i] * L;
    }
    r.risk_under_P += glm.design_probs[x] * a;
    r.risk_under_Pstar += glm.design_probs[x] * b;
  }
  r.gap = std::abs(r.risk_under_P - r.risk_under_Pstar);
  return r;
}

// Largest eta with sup over beta and x of E[exp(-eta L_beta) | x] <= 1; the conditions
// are checked first and any failure is reported instead.
inline ConditionReport glm_central_certificate(const GlmSpec& glm, const GlmTruth& truth, double cap = 1e3,
                                               double tol = 1e-13) {
  ConditionReport rep;
  rep.condition = ConditionKind::StrongCentral;
  auto cond = check_glm_conditions(glm, truth);
  rep.constants["sup_link_derivative"] = cond.sup_link_derivative;
  rep.constants["sup_conditional_mgf"] = cond.sup_conditional_mgf;
  rep.constants["mean_residual"] = cond.mean_residual;
  if (!cond.failures.empty()) {
    rep.holds = false;
    rep.notes = cond.failures;
    rep.margin = -inf;
    return rep;
  }
  const auto& bstar = glm.beta_grid[*cond.beta_star];
  auto worst = [&](double eta) {
    double w = -inf;
    for (const auto& b : glm.beta_grid)
      for (std::size_t x = 0; x < glm.design.size(); ++x) {
        double ts = glm.theta(bstar, x), t = glm.theta(b, x);
        if (t == ts) continue;
        w = std::max(w, central_moment_expfam(glm.family, truth.conditional[x], t, eta, ts).log_moment);
      }
    return w;
  };
  auto ok = [&](double eta) { return worst(eta) <= tol; };
  double lo = 0.0, hi = 1.0;
  while (ok(hi) && hi <= cap) {
    lo = hi;
    hi *= 2.0;
  }
  if (hi > cap) {
    rep.constants["eta_bar"] = cap;
  } else {
    while (lo == 0.0 && !ok(hi / 2.0) && hi > 1e-12) hi /= 2.0;
    if (lo == 0.0) lo = hi / 2.0;
    rep.constants["eta_bar"] = ok(lo) ? bisect_last_true(ok, lo, hi, 1e-10) : 0.0;
  }
  rep.holds = rep.constants["eta_bar"] > 0.0;
  rep.margin = rep.holds ? 0.0 : -inf;
  rep.constants["beta_star_index"] = static_cast<double>(*cond.beta_star);
  return rep;
}

// A finite log-loss problem over (x, y) pairs with the beta grid as predictors.
inline FiniteProblem glm_problem(const GlmSpec& glm, const GlmTruth& truth) {
  std::vector<double> probs;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t x = 0; x < glm.design.size(); ++x)
    for (std::size_t i = 0; i < truth.conditional[x].mass.size(); ++i) {
      probs.push_back(glm.design_probs[x] * truth.conditional[x].mass[i]);
      cells.emplace_back(x, i);
    }
  double s = sum(probs);
  for (auto& p : probs) p /= s;
  Matrix loss(glm.beta_grid.size(), cells.size());
  for (std::size_t b = 0; b < glm.beta_grid.size(); ++b)
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto [x, i] = cells[c];
      double y = truth.conditional[x].grid.nodes[i];
      loss(b, c) = -expfam_log_density(glm.family, glm.theta(glm.beta_grid[b], x), y);
    }
  FiniteProblem pr;
  pr.probs = std::move(probs);
  pr.loss = std::move(loss);
  validate(pr);
  return pr;
}

// ---- misspecified density models ----

struct EntroboundReport {
  double C = 0.0;  // sup P / P_{f*}
  bool applicable = false;
  double worst_margin = inf;
  double worst_pinsker_margin = inf;
  std::size_t comparator = 0;
  bool holds = false;
};

// E_P[L_f] <= C (D + sqrt(2 D)) with D = KL(p_{f*} || p_f), plus the Pinsker substep.
inline EntroboundReport entrobound_check(std::span<const double> p, const std::vector<std::vector<double>>& model,
                                         double tol = 1e-12) {
  EntroboundReport r;
  if (model.empty()) throw std::invalid_argument("entrobound_check: empty model");
  Matrix dens = Matrix::from_rows(model);
  // every density misses some mass of P: the ratio is unbounded for any comparator
  bool any_covers = false;
  for (const auto& q : model) {
    bool covers = q.size() == p.size();
    for (std::size_t z = 0; covers && z < p.size(); ++z) covers = !(p[z] > 0.0 && q[z] == 0.0);
    any_covers |= covers;
  }
  if (!any_covers) {
    r.C = inf;
    return r;
  }
  FiniteProblem pr = log_loss_problem(std::vector<double>(p.begin(), p.end()), dens, {}, true);
  r.comparator = comparator_of(pr);
  const auto& ps = model[r.comparator];
  for (std::size_t z = 0; z < p.size(); ++z) {
    if (p[z] == 0.0) continue;
    if (ps[z] == 0.0) {
      r.C = inf;
      return r;
    }
    r.C = std::max(r.C, p[z] / ps[z]);
  }
  r.applicable = true;
  r.holds = true;
  for (std::size_t f = 0; f < model.size(); ++f) {
    double D = kl_divergence(ps, model[f]);
    double lhs = excess_risk(pr, f, r.comparator);
    double rhs = r.C * (D + std::sqrt(2.0 * D));
    r.worst_margin = std::min(r.worst_margin, rhs - lhs);
    r.worst_pinsker_margin = std::min(r.worst_pinsker_margin, std::sqrt(2.0 * D) - total_variation_l1(ps, model[f]));
    if (!(lhs <= rhs + tol * std::max(1.0, std::abs(rhs)))) r.holds = false;
  }
  return r;
}

// ---- information complexity growth for a discretized Gaussian location model ----

struct IcSlopePoint {
  std::size_t n = 0;
  double n_times_ic = 0.0;
  double standard_error = 0.0;
  double x = 0.0;  // (d / (2 eta)) log n
};

struct IcSlopeReport {
  std::vector<IcSlopePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

inline std::pair<double, double> ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_fit: need two or more paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit: x has no spread");
  double b = sxy / sxx;
  return {b, my - b * mx};
}

// n E[IC_{n,eta}] of eta-generalized Bayes under a uniform prior on a theta grid of a
// Gaussian location model, data Gaussian with variance sigma^2. The cumulative excess
// loss depends on the sample only through its mean, which is drawn exactly.
inline IcSlopeReport bic_slope_diagnostic(double sigma_star, double sigma, double theta_true, std::span<const double> thetas,
                                          double eta, std::span<const std::size_t> ns, std::size_t reps,
                                          std::uint64_t seed, unsigned threads = 1) {
  const double s2 = sigma_star * sigma_star;
  const double ts = theta_true;  // mean theta_true * s2
  const double m = ts * s2;
  IcSlopeReport rep;
  std::vector<double> xs, ys;
  for (std::size_t n : ns) {
    auto vals = mc_map<double>(reps, seed + n, threads, [&](Rng& rng, std::size_t) {
      double ybar = m + sigma / std::sqrt(static_cast<double>(n)) * standard_normal(rng);
      std::vector<double> lw(thetas.size());
      for (std::size_t j = 0; j < thetas.size(); ++j) {
        double d = thetas[j] - ts;
        double cum = static_cast<double>(n) * (0.5 * s2 * d * d - d * (ybar - m));
        lw[j] = -eta * cum;
      }
      double lse = log_sum_exp(lw) - std::log(static_cast<double>(thetas.size()));
      return -lse / eta;  // n IC
    });
    auto st = summarize(vals);
    IcSlopePoint pt{n, st.mean, st.standard_error(), std::log(static_cast<double>(n)) / (2.0 * eta)};
    xs.push_back(pt.x);
    ys.push_back(pt.n_times_ic);
    rep.points.push_back(pt);
  }
  std::tie(rep.slope, rep.intercept) = ols_fit(xs, ys);
  return rep;
}

}  // namespace fastrates

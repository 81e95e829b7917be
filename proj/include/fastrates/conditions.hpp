#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fastrates/grip.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

enum class ConditionKind {
  StrongCentral,
  VCentral,
  VPpc,
  Witness,
  TauWitness,
  Bernstein,
  UniformExpTail,
  SmallBall,
  WeakenedSmallBall
};

inline std::string to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::StrongCentral: return "strong_central";
    case ConditionKind::VCentral: return "v_central";
    case ConditionKind::VPpc: return "v_ppc";
    case ConditionKind::Witness: return "witness";
    case ConditionKind::TauWitness: return "tau_witness";
    case ConditionKind::Bernstein: return "bernstein";
    case ConditionKind::UniformExpTail: return "uniform_exp_tail";
    case ConditionKind::SmallBall: return "small_ball";
    default: return "weakened_small_ball";
  }
}

struct ConditionReport {
  ConditionKind condition = ConditionKind::StrongCentral;
  bool holds = true;
  std::map<std::string, double> constants;
  std::optional<std::size_t> violator;
  double margin = inf;  // worst slack over predictors
  double tol = 0.0;
  std::vector<std::string> notes;
};

namespace detail {
// Track the worst slack and who produced it.
inline void record(ConditionReport& r, double slack, std::size_t who) {
  if (slack < r.margin || (std::isnan(slack) && !std::isnan(r.margin))) {
    r.margin = std::isnan(slack) ? -inf : slack;
    r.violator = who;
  }
}
inline ConditionReport finish(ConditionReport r) {
  r.holds = r.margin >= -r.tol;
  if (r.holds) r.violator.reset();
  return r;
}
inline ConditionReport start(ConditionKind k, double tol) {
  ConditionReport r;
  r.condition = k;
  r.tol = tol;
  return r;
}

// log E[exp(t L)] for a distribution, +inf allowed in L
inline double log_mgf(const Distribution& d, double t) {
  std::vector<double> x(d.values.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = d.values[i];
    if (v == inf)
      x[i] = t > 0 ? inf : (t < 0 ? -inf : 0.0);
    else
      x[i] = t * v;
  }
  return log_mean_exp(d.probs, x);
}

struct Moments {
  double mean = 0.0;
  double second = 0.0;
};

inline Moments moments(const Distribution& d) {
  Moments m;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (d.probs[i] == 0.0) continue;
    double v = d.values[i];
    if (v == inf) return {inf, inf};
    m.mean += d.probs[i] * v;
    m.second += d.probs[i] * v * v;
  }
  return m;
}

// E[L 1{L <= t}]
inline double truncated_mean(const Distribution& d, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i)
    if (d.probs[i] > 0.0 && d.values[i] <= t) s += d.probs[i] * d.values[i];
  return s;
}
}  // namespace detail

// max_f E[exp(-eta L_f)]
template <ExcessLossFamily Fam>
double max_central_moment(const Fam& fam, double eta, std::size_t* argmax = nullptr) {
  double best = -inf;
  for (std::size_t f = 0; f < fam.size(); ++f) {
    double l = detail::log_mgf(fam.excess_distribution(f), -eta);
    if (l > best) {
      best = l;
      if (argmax) *argmax = f;
    }
  }
  return std::exp(best);
}

template <ExcessLossFamily Fam>
ConditionReport check_strong_central(const Fam& fam, double eta_bar, double tol = 1e-9) {
  if (!(eta_bar > 0.0)) throw std::domain_error("check_strong_central: eta_bar must be positive");
  auto r = detail::start(ConditionKind::StrongCentral, tol);
  r.constants["eta_bar"] = eta_bar;
  for (std::size_t f = 0; f < fam.size(); ++f)
    detail::record(r, 1.0 - std::exp(detail::log_mgf(fam.excess_distribution(f), -eta_bar)), f);
  if (fam.size() == 0) r.margin = 0.0;
  return detail::finish(r);
}

inline ConditionReport check_strong_central(const FiniteProblem& pr, double eta_bar, double tol = 1e-9) {
  return check_strong_central(ProblemFamily(pr), eta_bar, tol);
}

// Largest eta with max_f E[exp(-eta L_f)] <= 1 + tol, to relative precision rel_tol.
// Returns cap when the condition still holds there and 0 when it fails for every eta.
template <ExcessLossFamily Fam>
double max_central_eta(const Fam& fam, double rel_tol = 1e-10, double cap = 1e6, double tol = 1e-9) {
  // same slack test as check_strong_central, so both agree at the boundary
  auto ok = [&](double eta) { return 1.0 - max_central_moment(fam, eta) >= -tol; };
  double lo = 0.0, hi = 1.0;
  if (ok(1.0)) {
    lo = 1.0;
    while (true) {
      if (lo >= cap) return cap;
      double next = std::min(cap, lo * 2.0);
      if (!ok(next)) {
        hi = next;
        break;
      }
      lo = next;
    }
  } else {
    hi = 1.0;
    double t = 0.5;
    while (!ok(t)) {
      hi = t;
      t *= 0.5;
      if (t < 1e-12) return 0.0;
    }
    lo = t;
  }
  return bisect_last_true(ok, lo, hi, rel_tol);
}

inline double max_central_eta(const FiniteProblem& pr, double rel_tol = 1e-10, double cap = 1e6, double tol = 1e-9) {
  return max_central_eta(ProblemFamily(pr), rel_tol, cap, tol);
}

// v: [0, inf) -> [0, inf), bounded and non-decreasing.
struct VFunction {
  enum class Kind { Constant, Power, Tabulated };
  Kind kind = Kind::Constant;
  double eta_bar = 0.0;
  double coeff = 0.0, exponent = 0.0, vmax = inf;
  std::vector<std::pair<double, double>> table;  // (eps, eta), step function

  static VFunction constant(double eta_bar) {
    if (!(eta_bar > 0.0)) throw std::domain_error("VFunction: constant must be positive");
    VFunction v;
    v.kind = Kind::Constant;
    v.eta_bar = eta_bar;
    return v;
  }
  // C eps^exponent capped at vmax
  static VFunction power(double coeff, double exponent, double vmax) {
    if (!(coeff > 0.0) || exponent < 0.0 || !(vmax > 0.0) || !std::isfinite(vmax))
      throw std::domain_error("VFunction: power needs coeff > 0, exponent >= 0 and a finite cap");
    VFunction v;
    v.kind = Kind::Power;
    v.coeff = coeff;
    v.exponent = exponent;
    v.vmax = vmax;
    return v;
  }
  static VFunction tabulated(std::vector<std::pair<double, double>> t) {
    if (t.empty()) throw std::domain_error("VFunction: empty table");
    std::sort(t.begin(), t.end());
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i].second < 0.0 || !std::isfinite(t[i].second)) throw std::domain_error("VFunction: table values must be finite and >= 0");
      if (i > 0 && t[i].second < t[i - 1].second) throw std::domain_error("VFunction: table must be non-decreasing");
    }
    VFunction v;
    v.kind = Kind::Tabulated;
    v.table = std::move(t);
    return v;
  }
  double operator()(double eps) const {
    switch (kind) {
      case Kind::Constant: return eta_bar;
      case Kind::Power: return eps <= 0.0 ? (exponent == 0.0 ? std::min(coeff, vmax) : 0.0)
                                          : std::min(coeff * std::pow(eps, exponent), vmax);
      default: {
        double out = 0.0;
        for (const auto& [e, h] : table)
          if (e <= eps) out = h;
        return out;
      }
    }
  }
};

// For each eps: max_f E[exp(v(eps) (loss_c - loss_f - eps))] <= 1 + tol, where c is the
// global comparator or, with search_comparator, the best candidate in F for that eps.
inline ConditionReport check_v_central(const FiniteProblem& pr, const VFunction& v, std::span<const double> eps_grid,
                                       double tol = 1e-9, bool search_comparator = false) {
  if (eps_grid.empty()) throw std::invalid_argument("check_v_central: empty epsilon grid");
  auto r = detail::start(ConditionKind::VCentral, tol);
  const std::size_t global = comparator_of(pr);
  double breaking = -1.0;
  for (double eps : eps_grid) {
    if (eps < 0.0) throw std::invalid_argument("check_v_central: epsilon must be >= 0");
    double eta = v(eps);
    if (eta == 0.0) continue;  // exp(0) = 1, nothing to check
    double best_slack = -inf;
    std::size_t best_violator = 0;
    std::vector<std::size_t> cands;
    if (search_comparator)
      for (std::size_t c = 0; c < pr.num_predictors(); ++c) {
        if (risk(pr, c) < inf) cands.push_back(c);
      }
    else
      cands.push_back(global);
    for (std::size_t c : cands) {
      double worst = inf;
      std::size_t who = 0;
      for (std::size_t f = 0; f < pr.num_predictors(); ++f) {
        auto L = excess_loss(pr, f, Comparator::index(c));
        Distribution d{L, pr.probs};
        double m = std::exp(detail::log_mgf(d, -eta) - eta * eps);
        if (1.0 - m < worst) {
          worst = 1.0 - m;
          who = f;
        }
      }
      if (worst > best_slack) {
        best_slack = worst;
        best_violator = who;
      }
    }
    if (best_slack < -tol && breaking < 0.0) breaking = eps;
    detail::record(r, best_slack, best_violator);
  }
  if (breaking >= 0.0) r.constants["breaking_epsilon"] = breaking;
  if (search_comparator) r.notes.push_back("comparator searched over F per epsilon");
  return detail::finish(r);
}

// For each eps with eta = v(eps): E[loss_{f*}] - E[g_eta] <= eps + tol_opt.
inline ConditionReport check_v_ppc(const FiniteProblem& pr, const VFunction& v, std::span<const double> eps_grid,
                                   const GripOptions& opt = {}) {
  if (eps_grid.empty()) throw std::invalid_argument("check_v_ppc: empty epsilon grid");
  auto r = detail::start(ConditionKind::VPpc, 0.0);
  r.constants["tol_opt"] = opt.tol;
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    double eps = eps_grid[i];
    double eta = v(eps);
    if (eta == 0.0) continue;
    PpcGap g = ppc_gap(pr, eta, opt);
    worst_gap = std::max(worst_gap, g.gap);
    detail::record(r, eps + opt.tol - g.gap, i);
  }
  r.constants["max_gap"] = worst_gap;
  if (r.margin == inf) r.margin = 0.0;
  r.notes.push_back("violator indexes the epsilon grid");
  return detail::finish(r);
}

struct PpcTransfer {
  ConditionReport smaller;   // v-PPC on (P, loss', F)
  ConditionReport original;  // v-PPC on (P, loss, F)
  bool transfers = false;    // smaller holds => original holds
};

// v-PPC on a pointwise smaller loss that agrees with loss on the comparator carries
// over to the original problem; both sides are certified and compared.
inline PpcTransfer verify_ppc_smaller_loss(const FiniteProblem& pr, const FiniteProblem& smaller, const VFunction& v,
                                           std::span<const double> eps_grid, const GripOptions& opt = {}) {
  if (smaller.num_predictors() != pr.num_predictors() || smaller.num_outcomes() != pr.num_outcomes() ||
      smaller.probs != pr.probs)
    throw std::invalid_argument("verify_ppc_smaller_loss: problems differ in P or shape");
  const std::size_t cmp = comparator_of(pr);
  for (std::size_t f = 0; f < pr.num_predictors(); ++f)
    for (std::size_t z = 0; z < pr.num_outcomes(); ++z) {
      if (pr.probs[z] == 0.0) continue;
      if (smaller.loss(f, z) > pr.loss(f, z)) throw std::invalid_argument("verify_ppc_smaller_loss: loss' exceeds loss");
      if (f == cmp && smaller.loss(f, z) != pr.loss(f, z))
        throw std::invalid_argument("verify_ppc_smaller_loss: loss' differs from loss on the comparator");
    }
  FiniteProblem sm = smaller;
  sm.comparator_index = cmp;
  FiniteProblem orig = pr;
  orig.comparator_index = cmp;
  PpcTransfer t;
  t.smaller = check_v_ppc(sm, v, eps_grid, opt);
  t.original = check_v_ppc(orig, v, eps_grid, opt);
  t.transfers = !t.smaller.holds || t.original.holds;
  return t;
}

// Slow-rate truncation: loss'_f = min(loss_f, loss_{f*} + u).
inline FiniteProblem truncate_losses(const FiniteProblem& pr, double u) {
  const std::size_t cmp = comparator_of(pr);
  FiniteProblem out = pr;
  for (std::size_t f = 0; f < pr.num_predictors(); ++f)
    for (std::size_t z = 0; z < pr.num_outcomes(); ++z) out.loss(f, z) = std::min(pr.loss(f, z), pr.loss(cmp, z) + u);
  out.comparator_index = cmp;
  return out;
}

// Threshold functions for the witness condition; values are clamped at 1.
struct TauFunction {
  enum class Kind { Constant, Power, LogShape, Linear, Tabulated };
  Kind kind = Kind::Constant;
  double u = 1.0;
  double exponent = 0.0;  // Power: u (1/x)^exponent, exponent = 1 - beta
  double kappa = 1.0, M = 1.0;  // LogShape: kappa^{-1} log(2M/(kappa x)); Linear: u max(1, x/M)
  std::vector<std::pair<double, double>> table;

  static TauFunction make(Kind k, double u) {
    TauFunction t;
    t.kind = k;
    t.u = u;
    return t;
  }
  static TauFunction constant(double u) { return make(Kind::Constant, u); }
  static TauFunction power(double u, double one_minus_beta) {
    TauFunction t = make(Kind::Power, u);
    t.exponent = one_minus_beta;
    return t;
  }
  static TauFunction log_shape(double kappa, double M) {
    TauFunction t = make(Kind::LogShape, 1.0);
    t.kappa = kappa;
    t.M = M;
    return t;
  }
  static TauFunction linear(double u, double M = 1.0) {
    TauFunction t = make(Kind::Linear, u);
    t.M = M;
    return t;
  }
  static TauFunction tabulated(std::vector<std::pair<double, double>> tab) {
    std::sort(tab.begin(), tab.end());
    TauFunction t = make(Kind::Tabulated, 1.0);
    t.table = std::move(tab);
    return t;
  }

  double raw(double x) const {
    switch (kind) {
      case Kind::Constant: return u;
      case Kind::Power: return x <= 0.0 ? (exponent > 0.0 ? inf : u) : u * std::pow(1.0 / x, exponent);
      case Kind::LogShape: return x <= 0.0 ? inf : std::log(2.0 * M / (kappa * x)) / kappa;
      case Kind::Linear: return u * std::max(1.0, x / M);
      default: {
        double out = table.empty() ? 1.0 : table.front().second;
        for (const auto& [a, b] : table)
          if (a <= x) out = b;
        return out;
      }
    }
  }
  double operator()(double x) const { return std::max(1.0, raw(x)); }
  bool clamped(double x) const { return raw(x) < 1.0; }
};

namespace detail {
template <ExcessLossFamily Fam, class Thr>
ConditionReport witness_impl(const Fam& fam, Thr threshold, double c, double tol, ConditionKind kind) {
  if (!(c > 0.0) || c > 1.0) throw std::domain_error("witness: c must lie in (0, 1]");
  auto r = start(kind, tol);
  r.constants["c"] = c;
  r.constants["c_prime"] = 1.0 - c;
  double c_best = 1.0;
  std::size_t clamps = 0;
  for (std::size_t f = 0; f < fam.size(); ++f) {
    Distribution d = fam.excess_distribution(f);
    Moments m = moments(d);
    auto [t, was_clamped] = threshold(m.mean);
    if (was_clamped) ++clamps;
    if (m.mean == inf) {
      record(r, -inf, f);
      c_best = 0.0;
      continue;
    }
    double tm = truncated_mean(d, t);
    record(r, tm - c * m.mean, f);
    if (m.mean > 0.0) c_best = std::min(c_best, tm / m.mean);
  }
  if (fam.size() == 0) r.margin = 0.0;
  r.constants["c_best"] = std::max(0.0, c_best);
  if (clamps > 0) {
    r.constants["tau_clamped"] = static_cast<double>(clamps);
    r.notes.push_back("threshold clamped at 1 for " + std::to_string(clamps) + " predictors");
  }
  return finish(r);
}
}  // namespace detail

// E[L_f 1{L_f <= u}] >= c E[L_f] for every f.
template <ExcessLossFamily Fam>
ConditionReport check_witness(const Fam& fam, double u, double c, double tol = 1e-9) {
  if (!(u > 0.0)) throw std::domain_error("check_witness: u must be positive");
  auto r = detail::witness_impl(fam, [u](double) { return std::pair<double, bool>{u, false}; }, c, tol, ConditionKind::Witness);
  r.constants["u"] = u;
  return r;
}

inline ConditionReport check_witness(const FiniteProblem& pr, double u, double c, double tol = 1e-9) {
  return check_witness(ProblemFamily(pr), u, c, tol);
}

template <ExcessLossFamily Fam>
ConditionReport check_tau_witness(const Fam& fam, const TauFunction& tau, double c, double tol = 1e-9) {
  auto r = detail::witness_impl(fam, [&tau](double x) { return std::pair<double, bool>{tau(x), tau.clamped(x)}; }, c, tol,
                                ConditionKind::TauWitness);
  r.constants["tau_u"] = tau.u;
  return r;
}

inline ConditionReport check_tau_witness(const FiniteProblem& pr, const TauFunction& tau, double c, double tol = 1e-9) {
  return check_tau_witness(ProblemFamily(pr), tau, c, tol);
}

// E[L_f^2] <= B E[L_f]^beta for f != comparator with E[L_f] >= 0; also reports the
// smallest B that would work for this beta.
template <ExcessLossFamily Fam>
ConditionReport check_bernstein(const Fam& fam, double beta, double B, double tol = 1e-9) {
  if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("check_bernstein: beta must lie in (0, 1]");
  if (!(B > 0.0)) throw std::domain_error("check_bernstein: B must be positive");
  auto r = detail::start(ConditionKind::Bernstein, tol);
  r.constants["beta"] = beta;
  r.constants["B"] = B;
  double bmin = 0.0;
  for (std::size_t f = 0; f < fam.size(); ++f) {
    if (f == fam.comparator()) continue;
    detail::Moments m = detail::moments(fam.excess_distribution(f));
    if (m.mean < 0.0) continue;
    double scale = m.mean == 0.0 ? 0.0 : std::pow(m.mean, beta);
    detail::record(r, m.second == inf ? -inf : B * scale - m.second, f);
    if (m.second > 0.0) bmin = std::max(bmin, scale > 0.0 ? m.second / scale : inf);
  }
  if (r.margin == inf) r.margin = 0.0;
  r.constants["B_min"] = bmin;
  return detail::finish(r);
}

inline ConditionReport check_bernstein(const FiniteProblem& pr, double beta, double B, double tol = 1e-9) {
  return check_bernstein(ProblemFamily(pr), beta, B, tol);
}

struct UniformTailReport {
  double kappa = 0.0;
  double log_M = 0.0;  // log sup_f E[exp(kappa L_f)]
  double M_kappa = 0.0;
  bool holds = false;
  TauFunction tau;     // 1 v kappa^{-1} log(2 M / (kappa x))
  double c = 0.5;
};

template <ExcessLossFamily Fam>
UniformTailReport check_uniform_exp_tail(const Fam& fam, double kappa) {
  if (!(kappa > 0.0)) throw std::domain_error("check_uniform_exp_tail: kappa must be positive");
  UniformTailReport r;
  r.kappa = kappa;
  r.log_M = -inf;
  for (std::size_t f = 0; f < fam.size(); ++f) r.log_M = std::max(r.log_M, detail::log_mgf(fam.excess_distribution(f), kappa));
  r.M_kappa = std::exp(r.log_M);
  r.holds = std::isfinite(r.M_kappa);
  r.tau = TauFunction::log_shape(kappa, r.M_kappa);
  return r;
}

inline UniformTailReport check_uniform_exp_tail(const FiniteProblem& pr, double kappa) {
  return check_uniform_exp_tail(ProblemFamily(pr), kappa);
}

// Divergence test for sup_f over growing truncations: given log sup values at
// increasing truncation levels, the supremum is declared infinite when it leaves the
// double range or keeps growing with non-shrinking increments.
struct DivergenceVerdict {
  bool divergent = false;
  double last_value = 0.0;
  std::size_t levels = 0;
};

inline DivergenceVerdict detect_divergence(std::span<const double> log_sup_by_level) {
  DivergenceVerdict v;
  v.levels = log_sup_by_level.size();
  if (log_sup_by_level.empty()) return v;
  v.last_value = log_sup_by_level.back();
  if (v.last_value == inf || v.last_value > std::log(DBL_MAX)) {
    v.divergent = true;
    return v;
  }
  if (log_sup_by_level.size() >= 4) {
    std::size_t n = log_sup_by_level.size();
    double d1 = log_sup_by_level[n - 3] - log_sup_by_level[n - 4];
    double d2 = log_sup_by_level[n - 2] - log_sup_by_level[n - 3];
    double d3 = log_sup_by_level[n - 1] - log_sup_by_level[n - 2];
    v.divergent = d1 > 0.0 && d2 >= d1 && d3 >= d2;
  }
  return v;
}

// Pairs of predictions for small-ball checks: the distribution of |f - h| under P.
template <class T>
concept PredictionFamily = requires(const T& t, std::size_t f) {
  { t.size() } -> std::convertible_to<std::size_t>;
  { t.comparator() } -> std::convertible_to<std::size_t>;
  { t.difference_distribution(f, f) } -> std::convertible_to<Distribution>;
};

class ProblemPredictions {
 public:
  explicit ProblemPredictions(const FiniteProblem& pr) : pr_(&pr), cmp_(comparator_of(pr)) {
    if (!pr.predictions) throw std::invalid_argument("small-ball: problem carries no prediction table");
  }
  std::size_t size() const { return pr_->num_predictors(); }
  std::size_t comparator() const { return cmp_; }
  Distribution difference_distribution(std::size_t f, std::size_t h) const {
    Distribution d{std::vector<double>(pr_->num_outcomes()), pr_->probs};
    for (std::size_t z = 0; z < d.values.size(); ++z) d.values[z] = std::abs((*pr_->predictions)(f, z) - (*pr_->predictions)(h, z));
    return d;
  }

 private:
  const FiniteProblem* pr_;
  std::size_t cmp_;
};

enum class PairSet { All, VsComparator };

// P(|f - h| >= kappa ||f - h||_{L2(P)}) >= epsilon over the requested pairs; pairs
// with ||f - h|| = 0 are skipped.
template <PredictionFamily Fam>
ConditionReport check_small_ball(const Fam& fam, double kappa, double epsilon, PairSet pairs, double tol = 1e-12) {
  auto r = detail::start(ConditionKind::SmallBall, tol);
  r.constants["kappa"] = kappa;
  r.constants["epsilon"] = epsilon;
  double worst_prob = 1.0;
  auto check_pair = [&](std::size_t f, std::size_t h) {
    Distribution d = fam.difference_distribution(f, h);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) norm2 += d.probs[i] * d.values[i] * d.values[i];
    if (!(norm2 > 0.0)) return;
    double thr = kappa * std::sqrt(norm2), prob = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i)
      if (d.values[i] >= thr) prob += d.probs[i];
    worst_prob = std::min(worst_prob, prob);
    detail::record(r, prob - epsilon, f);
  };
  for (std::size_t f = 0; f < fam.size(); ++f) {
    if (pairs == PairSet::VsComparator) {
      if (f != fam.comparator()) check_pair(f, fam.comparator());
    } else {
      for (std::size_t h = f + 1; h < fam.size(); ++h) check_pair(f, h);
    }
  }
  if (r.margin == inf) r.margin = 0.0;
  r.constants["min_probability"] = worst_prob;
  return detail::finish(r);
}

inline ConditionReport check_small_ball(const FiniteProblem& pr, double kappa, double epsilon, PairSet pairs,
                                        double tol = 1e-12) {
  return check_small_ball(ProblemPredictions(pr), kappa, epsilon, pairs, tol);
}

// Small-ball constants (C1, C2) to the weakened form (2/C2, C1 C2 / 2).
inline std::pair<double, double> smallball_to_weakened(double C1, double C2) {
  if (!(C1 > 0.0)) throw std::domain_error("smallball_to_weakened: C1 must be positive");
  if (!(C2 > 0.0) || !(C2 < 1.0)) throw std::domain_error("smallball_to_weakened: C2 must lie in (0, 1)");
  return {2.0 / C2, C1 * C2 / 2.0};
}

// E[1{S < C1' E[S]} S] >= C2' E[S] for each nonnegative variable in the list.
inline ConditionReport check_weakened_small_ball(const std::vector<Distribution>& vars, double C1p, double C2p,
                                                 double tol = 1e-12) {
  auto r = detail::start(ConditionKind::WeakenedSmallBall, tol);
  r.constants["C1_prime"] = C1p;
  r.constants["C2_prime"] = C2p;
  for (std::size_t a = 0; a < vars.size(); ++a) {
    const auto& d = vars[a];
    double mean = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) mean += d.probs[i] * d.values[i];
    double part = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i)
      if (d.values[i] < C1p * mean) part += d.probs[i] * d.values[i];
    detail::record(r, part - C2p * mean, a);
  }
  if (r.margin == inf) r.margin = 0.0;
  return detail::finish(r);
}

// Squared differences (f - h)^2 for the pairs a small-ball check visits.
template <PredictionFamily Fam>
std::vector<Distribution> squared_differences(const Fam& fam, PairSet pairs) {
  std::vector<Distribution> out;
  auto add = [&](std::size_t f, std::size_t h) {
    Distribution d = fam.difference_distribution(f, h);
    for (auto& v : d.values) v *= v;
    double m = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) m += d.probs[i] * d.values[i];
    if (m > 0.0) out.push_back(std::move(d));
  };
  for (std::size_t f = 0; f < fam.size(); ++f) {
    if (pairs == PairSet::VsComparator) {
      if (f != fam.comparator()) add(f, fam.comparator());
    } else {
      for (std::size_t h = f + 1; h < fam.size(); ++h) add(f, h);
    }
  }
  return out;
}

// Slow-rate bound on the PPC gap: for nonnegative losses and eta <= 1/E[loss_{f*}],
// E[loss_{f*} - g_eta] <= eta e (u^2 + 1.5 E[loss_{f*}^2]).
inline double slow_rate_bound(const FiniteProblem& pr, double eta, double u) {
  const std::size_t c = comparator_of(pr);
  double second = 0.0;
  for (std::size_t z = 0; z < pr.num_outcomes(); ++z) second += mass_times(pr.probs[z], pr.loss(c, z) * pr.loss(c, z));
  return eta * std::exp(1.0) * (u * u + 1.5 * second);
}

// The positivity requirement of the slow-rate bound: E[L_f 1{L_f <= u}] > 0 whenever E[L_f] > 0.
inline bool truncated_excess_positive(const FiniteProblem& pr, double u) {
  ProblemFamily fam(pr);
  for (std::size_t f = 0; f < fam.size(); ++f) {
    Distribution d = fam.excess_distribution(f);
    if (detail::moments(d).mean > 0.0 && !(detail::truncated_mean(d, u) > 0.0)) return false;
  }
  return true;
}

}  // namespace fastrates

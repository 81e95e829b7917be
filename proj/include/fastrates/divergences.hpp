#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastrates/conditions.hpp"
#include "fastrates/esi.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

namespace detail {
inline void same_length(std::span<const double> p, std::span<const double> q, const char* who) {
  if (p.size() != q.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
}
}  // namespace detail

// sum p log(p/q); 0 log(0/q) = 0 and +inf when p > 0 = q.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  detail::same_length(p, q, "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return inf;
    s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, s);
}

// (alpha - 1)^{-1} log sum p^alpha q^{1-alpha}, alpha in (0, 1).
inline double renyi_divergence(std::span<const double> p, std::span<const double> q, double alpha) {
  detail::same_length(p, q, "renyi_divergence");
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::domain_error("renyi_divergence: alpha must lie in (0, 1)");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0 && q[i] > 0.0) s += std::pow(p[i], alpha) * std::pow(q[i], 1.0 - alpha);
  if (s == 0.0) return inf;
  return std::max(0.0, std::log(s) / (alpha - 1.0));
}

inline double hellinger_affinity(std::span<const double> p, std::span<const double> q) {
  detail::same_length(p, q, "hellinger_affinity");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
  return s;
}

// 2 (1 - sum sqrt(p q))
inline double squared_hellinger(std::span<const double> p, std::span<const double> q) {
  return std::max(0.0, 2.0 * (1.0 - hellinger_affinity(p, q)));
}

// eta^{-1} (1 - E_P[(q/p)^eta])
inline double generalized_hellinger(std::span<const double> p, std::span<const double> q, double eta) {
  detail::same_length(p, q, "generalized_hellinger");
  if (!(eta > 0.0)) throw std::domain_error("generalized_hellinger: eta must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += p[i] * std::pow(q[i] / p[i], eta);
  return (1.0 - s) / eta;
}

inline double total_variation_l1(std::span<const double> p, std::span<const double> q) {
  detail::same_length(p, q, "total_variation_l1");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

// p(z) exp(-eta L(z)) / E[exp(-eta L)]
struct TiltedDensity {
  std::vector<double> base;
  std::vector<double> tilt;
  double eta = 0.0;
  std::vector<double> density;
};

inline TiltedDensity tilted_density(std::span<const double> p, std::span<const double> L, double eta) {
  detail::same_length(p, L, "tilted_density");
  if (!(eta > 0.0)) throw std::domain_error("tilted_density: eta must be positive");
  TiltedDensity t{std::vector<double>(p.begin(), p.end()), std::vector<double>(L.begin(), L.end()), eta, {}};
  std::vector<double> lw(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (L[i] == -inf) throw std::domain_error("tilted_density: excess loss of -inf");
    lw[i] = (p[i] > 0.0 && L[i] != inf) ? std::log(p[i]) - eta * L[i] : -inf;
  }
  double lz = log_sum_exp(lw);
  if (lz == -inf) throw std::domain_error("tilted_density: degenerate tilt, E[exp(-eta L)] = 0");
  t.density.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) t.density[i] = lw[i] == -inf ? 0.0 : std::exp(lw[i] - lz);
  return t;
}

// Squared misspecification distance (2/eta_bar)(1 - sum sqrt(p_{f,eta_bar} p_{g,eta_bar})).
inline double misspec_metric(const FiniteProblem& pr, std::size_t f, std::size_t g, double eta_bar) {
  auto a = tilted_density(pr.probs, excess_loss(pr, f), eta_bar);
  auto b = tilted_density(pr.probs, excess_loss(pr, g), eta_bar);
  if (f == g) return 0.0;
  return std::max(0.0, 2.0 / eta_bar * (1.0 - hellinger_affinity(a.density, b.density)));
}

// g_eta(r) = eta^{-1}(1 - r^eta) - (1 - r), with eta = 0 read as the limit -log r - (1 - r).
inline double ratio_g(double eta, double r) {
  if (r < 0.0 || std::isnan(r)) throw std::domain_error("ratio_g: r must be >= 0");
  if (r == 0.0) return eta > 0.0 ? 1.0 / eta - 1.0 : inf;
  if (r == inf) return inf;
  const double x = std::log(r);
  if (std::abs(x) < 0.5) {
    // sum_{k >= 2} x^k (1 - eta^{k-1}) / k!
    double term = x, s = 0.0, ek = 1.0;
    for (int k = 2; k < 40; ++k) {
      term *= x / k;
      ek *= eta;
      double add = term * (1.0 - ek);
      s += add;
      if (std::abs(add) < 1e-18 * std::abs(s)) break;
    }
    return s;
  }
  double first = eta == 0.0 ? -x : -std::expm1(eta * x) / eta;
  return first + std::expm1(x);
}

// g_{eta'}(r) / g_eta(r), continuous at r = 1 with value (1 - eta')/(1 - eta).
inline double ratio_h(double eta_prime, double eta, double r) {
  if (r == 1.0) return (1.0 - eta_prime) / (1.0 - eta);
  return ratio_g(eta_prime, r) / ratio_g(eta, r);
}

struct RatioConstants {
  double eta_prime = 0.0;
  double eta = 0.0;
  double V = 0.0;
  double C = 0.0;            // h(1/V), the best constant on r >= 1/V
  double upper_bound = 0.0;  // the simplified bound
};

inline RatioConstants ratio_constant(double eta_prime, double eta, double V) {
  if (!(eta_prime >= 0.0) || !(eta_prime < eta) || !(eta < 1.0)) throw std::domain_error("ratio_constant: need 0 <= eta' < eta < 1");
  if (!(V > 1.0) || !std::isfinite(V)) throw std::domain_error("ratio_constant: need 1 < V < inf");
  RatioConstants rc{eta_prime, eta, V, 0.0, 0.0};
  if (eta_prime == 0.0) {
    const double lv = std::log(V), a = -std::expm1(-lv);
    rc.C = (lv - a) / (-std::expm1(-eta * lv) / eta - a);
    rc.upper_bound = eta / (1.0 - eta) * lv + 1.0 / (1.0 - eta);
  } else {
    rc.C = ratio_h(eta_prime, eta, 1.0 / V);
    rc.upper_bound = (1.0 / eta_prime - 1.0) / (1.0 / eta - 1.0);
  }
  return rc;
}

// (1/c)(eta u + 1)/(1 - eta/eta_bar)
inline double cu_constant(double eta, double eta_bar, double u, double c) {
  if (!(eta > 0.0) || !(eta < eta_bar)) throw std::domain_error("cu_constant: need 0 < eta < eta_bar");
  if (!(u > 0.0)) throw std::domain_error("cu_constant: u must be positive");
  if (!(c > 0.0) || c > 1.0) throw std::domain_error("cu_constant: c must lie in (0, 1]");
  return (eta * u + 1.0) / (c * (1.0 - eta / eta_bar));
}

struct RiskVsHellinger {
  double risk = 0.0;       // E[L_f]
  double hellinger = 0.0;  // E^he(eta)[L_f]
  double annealed = 0.0;   // E^ann(eta)[L_f]
  double constant = 0.0;   // c_u, or c_{tau(lambda)}
  double lambda = 0.0;     // 0 for the constant-u form
  double bound_he = 0.0;
  double bound_ann = 0.0;
  double margin = 0.0;     // bound_he - risk, relative slack included via tol
  bool holds = false;
};

// E[L] <= lambda v c E^he(eta)[L] <= lambda v c E^ann(eta)[L] for one excess-loss distribution.
inline RiskVsHellinger risk_vs_hellinger(const Distribution& L, double eta, double constant, double lambda = 0.0,
                                         double tol = 1e-10) {
  RiskVsHellinger r;
  r.risk = expect(L.probs, L.values);
  r.hellinger = hellinger_expectation(L.probs, L.values, eta);
  r.annealed = annealed_expectation(L.probs, L.values, eta);
  r.constant = constant;
  r.lambda = lambda;
  r.bound_he = std::max(lambda, constant * r.hellinger);
  r.bound_ann = std::max(lambda, constant * r.annealed);
  const double slack = tol * std::max(1.0, std::abs(r.risk));
  r.margin = r.bound_he - r.risk;
  r.holds = r.margin >= -slack && r.bound_ann >= r.bound_he - slack;
  return r;
}

struct KlHellingerReport {
  std::vector<RiskVsHellinger> per_predictor;
  double worst_margin = inf;
  bool holds = true;
  double constant = 0.0;
  ConditionReport central;
  ConditionReport witness;
};

// Checks E[L_f] <= c_u E^he <= c_u E^ann for every f after certifying the strong
// eta_bar-central and (u, c)-witness conditions.
inline KlHellingerReport kl_vs_hellinger_bound(const FiniteProblem& pr, double eta, double eta_bar, double u, double c,
                                               double tol = 1e-10) {
  KlHellingerReport out;
  out.central = check_strong_central(pr, eta_bar);
  out.witness = check_witness(pr, u, c);
  if (!out.central.holds) throw std::domain_error("kl_vs_hellinger_bound: strong central condition not certified");
  if (!out.witness.holds) throw std::domain_error("kl_vs_hellinger_bound: witness condition not certified");
  out.constant = cu_constant(eta, eta_bar, u, c);
  ProblemFamily fam(pr);
  for (std::size_t f = 0; f < fam.size(); ++f) {
    auto r = risk_vs_hellinger(fam.excess_distribution(f), eta, out.constant, 0.0, tol);
    out.worst_margin = std::min(out.worst_margin, r.margin);
    out.holds = out.holds && r.holds;
    out.per_predictor.push_back(r);
  }
  return out;
}

// The tau form: E[L_f] <= lambda v c_{tau(lambda)} E^he(eta)[L_f].
inline KlHellingerReport kl_vs_hellinger_tau(const FiniteProblem& pr, double eta, double eta_bar, const TauFunction& tau,
                                             double c, double lambda, double tol = 1e-10) {
  if (!(lambda > 0.0)) throw std::domain_error("kl_vs_hellinger_tau: lambda must be positive");
  KlHellingerReport out;
  out.central = check_strong_central(pr, eta_bar);
  out.witness = check_tau_witness(pr, tau, c);
  if (!out.central.holds) throw std::domain_error("kl_vs_hellinger_tau: strong central condition not certified");
  if (!out.witness.holds) throw std::domain_error("kl_vs_hellinger_tau: tau-witness condition not certified");
  out.constant = cu_constant(eta, eta_bar, tau(lambda), c);
  ProblemFamily fam(pr);
  for (std::size_t f = 0; f < fam.size(); ++f) {
    auto r = risk_vs_hellinger(fam.excess_distribution(f), eta, out.constant, lambda, tol);
    out.worst_margin = std::min(out.worst_margin, r.margin);
    out.holds = out.holds && r.holds;
    out.per_predictor.push_back(r);
  }
  return out;
}

// Exponential-tail corollary: with tau from the uniform tail of L and c = 1/2,
// E[L_f] <= max(H, c_{tau(H)} H) where H = E^he(eta)[L_f].
struct ExpTailBound {
  double kappa = 0.0;
  double M_kappa = 0.0;
  double worst_margin = inf;
  double max_implied_constant = 0.0;  // sup_f E[L_f] / (H log(1/H)) over f with H < 1/e
  bool holds = true;
};

inline ExpTailBound exp_tail_bound(const FiniteProblem& pr, double eta, double eta_bar, double kappa, double tol = 1e-10) {
  auto central = check_strong_central(pr, eta_bar);
  if (!central.holds) throw std::domain_error("exp_tail_bound: strong central condition not certified");
  auto tail = check_uniform_exp_tail(pr, kappa);
  if (!tail.holds) throw std::domain_error("exp_tail_bound: no uniform exponential upper tail at this kappa");
  ExpTailBound out;
  out.kappa = kappa;
  out.M_kappa = tail.M_kappa;
  ProblemFamily fam(pr);
  for (std::size_t f = 0; f < fam.size(); ++f) {
    Distribution d = fam.excess_distribution(f);
    double H = hellinger_expectation(d.probs, d.values, eta);
    double risk = expect(d.probs, d.values);
    if (!(H > 0.0)) {
      out.worst_margin = std::min(out.worst_margin, -risk);
      out.holds = out.holds && risk <= tol;
      continue;
    }
    double bound = std::max(H, cu_constant(eta, eta_bar, tail.tau(H), 0.5) * H);
    out.worst_margin = std::min(out.worst_margin, bound - risk);
    out.holds = out.holds && risk <= bound + tol * std::max(1.0, risk);
    if (H < std::exp(-1.0)) out.max_implied_constant = std::max(out.max_implied_constant, risk / (H * std::log(1.0 / H)));
  }
  return out;
}

// Constants of the older KL-vs-Hellinger bound for well-specified log loss, for side by
// side reporting. Region of the tail moment: p*/p_f >= e^{1/kappa}.
struct WongShenComparison {
  double kappa = 0.0;
  double M_prime = 0.0;
  double hellinger = 0.0;  // E^he(1/2)[L_f]
  bool in_regime = false;  // hellinger <= (1 - e^{-1})^2 / 2
  double their_bound = 0.0;
  double our_bound = 0.0;
  double risk = 0.0;
};

inline WongShenComparison wong_shen_comparison(std::span<const double> p_star, const std::vector<std::vector<double>>& model,
                                               std::size_t f, double kappa) {
  if (!(kappa > 0.0) || !(kappa < 1.0)) throw std::domain_error("wong_shen_comparison: kappa must lie in (0, 1)");
  WongShenComparison w;
  w.kappa = kappa;
  const double thr = std::exp(1.0 / kappa);
  double Mk = 0.0;
  for (const auto& pf : model) {
    detail::same_length(p_star, pf, "wong_shen_comparison");
    double mp = 0.0, mk = 0.0;
    for (std::size_t z = 0; z < p_star.size(); ++z) {
      if (p_star[z] == 0.0) continue;
      double ratio = pf[z] == 0.0 ? inf : p_star[z] / pf[z];
      double term = ratio == inf ? inf : p_star[z] * std::pow(ratio, kappa);
      mk += term;
      if (ratio >= thr) mp += term;
    }
    w.M_prime = std::max(w.M_prime, mp);
    Mk = std::max(Mk, mk);
  }
  const auto& q = model.at(f);
  std::vector<double> L(p_star.size());
  for (std::size_t z = 0; z < L.size(); ++z) L[z] = p_star[z] == 0.0 ? 0.0 : (q[z] == 0.0 ? inf : std::log(p_star[z] / q[z]));
  w.hellinger = hellinger_expectation(p_star, L, 0.5);
  w.risk = kl_divergence(p_star, q);
  const double e1 = -std::expm1(-1.0);
  w.in_regime = w.hellinger <= 0.5 * e1 * e1;
  if (w.hellinger > 0.0) {
    double lg = std::max(2.0, std::log(w.M_prime / w.hellinger));
    w.their_bound = (6.0 + 2.0 * std::numbers::ln2 / (e1 * e1) + 4.0 / kappa * lg) * w.hellinger;
    TauFunction tau = TauFunction::log_shape(kappa, Mk);
    w.our_bound = std::max(w.hellinger, cu_constant(0.5, 1.0, tau(w.hellinger), 0.5) * w.hellinger);
  }
  return w;
}

}  // namespace fastrates

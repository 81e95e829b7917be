#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fastrates/numeric.hpp"

namespace fastrates {

enum class ExpectationKind { Plain, Annealed, Hellinger };

struct TransformedExpectation {
  ExpectationKind kind;
  double eta;
  double value;
};

namespace detail {
inline void require_eta(double eta) {
  if (!(eta > 0.0)) throw std::domain_error("learning rate must be positive");
}

// log E[exp(-eta U)] with exp(-eta * inf) = 0.
inline double log_neg_mgf(std::span<const double> p, std::span<const double> u, double eta) {
  std::vector<double> x(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) x[i] = u[i] == inf ? -inf : -eta * u[i];
  return log_mean_exp(p, x);
}
}  // namespace detail

// -(1/eta) log E[exp(-eta U)]
inline double annealed_expectation(std::span<const double> p, std::span<const double> u, double eta) {
  detail::require_eta(eta);
  double l = detail::log_neg_mgf(p, u, eta);
  if (l == -inf) return inf;
  return -l / eta;
}

// (1/eta)(1 - E[exp(-eta U)])
inline double hellinger_expectation(std::span<const double> p, std::span<const double> u, double eta) {
  detail::require_eta(eta);
  double l = detail::log_neg_mgf(p, u, eta);
  if (l == -inf) return 1.0 / eta;
  return -std::expm1(l) / eta;
}

inline TransformedExpectation transformed_expectation(ExpectationKind kind, std::span<const double> p,
                                                      std::span<const double> u, double eta) {
  switch (kind) {
    case ExpectationKind::Annealed: return {kind, eta, annealed_expectation(p, u, eta)};
    case ExpectationKind::Hellinger: return {kind, eta, hellinger_expectation(p, u, eta)};
    default: return {kind, eta, expect(p, u)};
  }
}

// U <=_eta U' on a finite space: E[exp(eta (U - U'))] <= 1 + tol.
struct EsiStatement {
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> probs;
  double eta = 0.0;
  double moment = 0.0;
  double tol = 0.0;
  bool holds = false;
};

inline double esi_moment(std::span<const double> p, std::span<const double> lhs, std::span<const double> rhs,
                         double eta) {
  detail::require_eta(eta);
  if (lhs.size() != p.size() || rhs.size() != p.size()) throw std::invalid_argument("esi: dimension mismatch");
  std::vector<double> x(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) {
      x[i] = 0.0;
      continue;
    }
    if (lhs[i] == inf && rhs[i] == inf) throw std::domain_error("esi: inf - inf on a mass-carrying outcome");
    if (lhs[i] == inf)
      x[i] = inf;
    else if (rhs[i] == inf)
      x[i] = -inf;
    else
      x[i] = eta * (lhs[i] - rhs[i]);
  }
  double l = log_mean_exp(p, x);
  return l == -inf ? 0.0 : std::exp(l);
}

inline EsiStatement check_esi(std::vector<double> lhs, std::vector<double> rhs, std::vector<double> probs,
                              double eta, double tol = 1e-10) {
  EsiStatement s;
  s.moment = esi_moment(probs, lhs, rhs, eta);
  s.lhs = std::move(lhs);
  s.rhs = std::move(rhs);
  s.probs = std::move(probs);
  s.eta = eta;
  s.tol = tol;
  s.holds = s.moment <= 1.0 + tol;
  return s;
}

// Joint distribution of two independent finite random variables; outcome (i, j)
// is stored at index i * |q| + j.
struct ProductSpace {
  std::vector<double> probs;
  std::size_t left = 0, right = 0;

  std::vector<double> lift_left(std::span<const double> u) const {
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < left; ++i)
      for (std::size_t j = 0; j < right; ++j) out[i * right + j] = u[i];
    return out;
  }
  std::vector<double> lift_right(std::span<const double> v) const {
    std::vector<double> out(probs.size());
    for (std::size_t i = 0; i < left; ++i)
      for (std::size_t j = 0; j < right; ++j) out[i * right + j] = v[j];
    return out;
  }
};

inline ProductSpace product_space(std::span<const double> p, std::span<const double> q) {
  ProductSpace s;
  s.left = p.size();
  s.right = q.size();
  s.probs.resize(p.size() * q.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) s.probs[i * q.size() + j] = p[i] * q[j];
  return s;
}

namespace detail {
inline bool is_constant(std::span<const double> v) {
  for (double x : v)
    if (x != v[0]) return false;
  return true;
}
}  // namespace detail

// From U <=_eta a and V <=_eta b on a common space, the statement U + V <=_{eta/2} a + b.
inline EsiStatement esi_weak_transitivity(const EsiStatement& s1, const EsiStatement& s2) {
  if (s1.eta != s2.eta) throw std::invalid_argument("weak transitivity: statements have different rates");
  if (s1.probs != s2.probs) throw std::invalid_argument("weak transitivity: statements live on different spaces");
  if (s1.rhs.empty() || !detail::is_constant(s1.rhs) || !detail::is_constant(s2.rhs))
    throw std::invalid_argument("weak transitivity: right-hand sides must be constants");
  std::vector<double> lhs(s1.lhs.size()), rhs(s1.lhs.size(), s1.rhs[0] + s2.rhs[0]);
  for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] = s1.lhs[i] + s2.lhs[i];
  EsiStatement out = check_esi(std::move(lhs), std::move(rhs), s1.probs, s1.eta / 2.0, std::max(s1.tol, s2.tol));
  if (s1.holds && s2.holds && !out.holds)
    throw std::logic_error("weak transitivity violated on a finite space");
  return out;
}

struct EsiImplications {
  double lhs_mean = 0.0;
  double rhs_mean = 0.0;
  double mean_gap = 0.0;  // E[lhs] - E[rhs], at most 0 when the statement holds
  double tail_prob = 0.0;  // P(lhs > rhs + K/eta)
  double tail_bound = 0.0;  // exp(-K)
};

inline EsiImplications esi_implications(const EsiStatement& s, double K) {
  if (!s.holds) throw std::domain_error("esi_implications: statement does not hold");
  if (!(K > 0.0)) throw std::domain_error("esi_implications: K must be positive");
  EsiImplications r;
  r.lhs_mean = expect(s.probs, s.lhs);
  r.rhs_mean = expect(s.probs, s.rhs);
  r.mean_gap = r.lhs_mean - r.rhs_mean;
  for (std::size_t i = 0; i < s.probs.size(); ++i)
    if (s.probs[i] > 0.0 && s.lhs[i] > s.rhs[i] + K / s.eta) r.tail_prob += s.probs[i];
  r.tail_bound = std::exp(-K);
  // Jensen and Markov with the verdict tolerance E[e^{eta(U-U')}] <= 1 + tol.
  if (r.mean_gap > s.tol / s.eta + 1e-12 || r.tail_prob > r.tail_bound * (1.0 + s.tol) + 1e-15)
    throw std::logic_error("esi_implications: implication violated on a finite space");
  return r;
}

}  // namespace fastrates

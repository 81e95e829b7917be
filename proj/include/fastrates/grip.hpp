#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastrates/esi.hpp"
#include "fastrates/estimators.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

// m_Q(z) = -(1/eta) log sum_f q_f exp(-eta loss_f(z))
inline std::vector<double> mix_loss(const FiniteProblem& pr, const WeightVector& q, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("mix_loss: eta must be positive");
  if (q.size() != pr.num_predictors()) throw std::invalid_argument("mix_loss: weight length differs from |F|");
  std::vector<double> m(pr.num_outcomes());
  std::vector<double> terms(pr.num_predictors());
  for (std::size_t z = 0; z < m.size(); ++z) {
    for (std::size_t f = 0; f < terms.size(); ++f)
      terms[f] = (q[f] == 0.0 || pr.loss(f, z) == inf) ? -inf : std::log(q[f]) - eta * pr.loss(f, z);
    double l = log_sum_exp(terms);
    m[z] = l == -inf ? inf : -l / eta;
  }
  return m;
}

inline double mix_objective(const FiniteProblem& pr, const WeightVector& q, double eta) {
  return expect(pr.probs, mix_loss(pr, q, eta));
}

struct GripOptions {
  std::size_t max_iter = 50000;
  double tol = 1e-8;
};

struct GripResult {
  double eta = 0.0;
  WeightVector mixing_weights;
  std::vector<double> grip_loss;
  double objective = 0.0;
  double opt_gap = 0.0;  // Frank-Wolfe gap, an upper bound on objective - infimum
  std::size_t iterations = 0;
};

class GripNonConvergence : public std::runtime_error {
 public:
  GripNonConvergence(const std::string& what, GripResult best) : std::runtime_error(what), best_(std::move(best)) {}
  const GripResult& best() const { return best_; }

 private:
  GripResult best_;
};

namespace detail {

// Mixture state for the log-optimal-portfolio form of the objective. With
// a(f,z) = -eta loss(f,z) and lxi(z) = log sum_f q_f exp(a(f,z)), the objective is
// -(1/eta) E[lxi] and the gradient in q_f is -(1/eta) E[exp(a(f,.) - lxi)].
struct GripState {
  std::vector<double> lxi;
  std::vector<double> ratio;  // E[exp(a(f,.) - lxi)] per predictor
  double objective = inf;
};

inline GripState grip_state(const Matrix& a, std::span<const double> probs, std::span<const double> logq, double eta) {
  const std::size_t k = a.rows(), nz = a.cols();
  GripState s;
  s.lxi.assign(nz, -inf);
  std::vector<double> terms(k);
  double obj = 0.0;
  for (std::size_t z = 0; z < nz; ++z) {
    if (probs[z] == 0.0) continue;
    for (std::size_t f = 0; f < k; ++f) terms[f] = logq[f] + a(f, z);
    s.lxi[z] = log_sum_exp(terms);
    if (s.lxi[z] == -inf) {
      s.objective = inf;
      return s;
    }
    obj += probs[z] * (-s.lxi[z] / eta);
  }
  s.objective = obj;
  s.ratio.assign(k, 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    double r = 0.0;
    for (std::size_t z = 0; z < nz; ++z)
      if (probs[z] > 0.0 && a(f, z) > -inf) r += probs[z] * std::exp(a(f, z) - s.lxi[z]);
    s.ratio[f] = r;
  }
  return s;
}

// Objective change from logq_old (state s) to logq_new, as -(1/eta) E[log1p(sum_f dq_f (exp(a - lxi) - 1))];
// the -1 is free since sum_f dq_f = 0 and it cancels the rounding left by renormalization.
// Differencing two objectives directly loses everything below ulp(objective), which stalls
// the line search at small eta.
inline double objective_change(const Matrix& a, std::span<const double> probs, const GripState& s,
                               std::span<const double> logq_old, std::span<const double> logq_new, double eta) {
  const std::size_t k = a.rows();
  std::vector<double> dq(k);
  for (std::size_t f = 0; f < k; ++f) {
    double qn = logq_new[f] == -inf ? 0.0 : std::exp(logq_new[f]);
    double qo = logq_old[f] == -inf ? 0.0 : std::exp(logq_old[f]);
    dq[f] = qn - qo;
  }
  double d = 0.0;
  for (std::size_t z = 0; z < a.cols(); ++z) {
    if (probs[z] == 0.0) continue;
    double x = 0.0;
    for (std::size_t f = 0; f < k; ++f)
      if (dq[f] != 0.0) x += dq[f] * ((a(f, z) > -inf ? std::exp(a(f, z) - s.lxi[z]) : 0.0) - 1.0);
    if (x <= -1.0) return inf;
    d += probs[z] * std::log1p(x);
  }
  return -d / eta;
}

inline double fw_gap(const GripState& s, double eta) {
  double m = 0.0;
  for (double r : s.ratio) m = std::max(m, r);
  return std::max(0.0, (m - 1.0) / eta);
}

inline GripResult make_result(const FiniteProblem& pr, std::span<const double> logq, const GripState& s, double eta,
                              std::size_t iters) {
  GripResult r;
  r.eta = eta;
  std::vector<double> q(logq.size());
  for (std::size_t f = 0; f < q.size(); ++f) q[f] = logq[f] == -inf ? 0.0 : std::exp(logq[f]);
  double tot = sum(q);
  for (auto& x : q) x /= tot;
  r.mixing_weights.weights = std::move(q);
  r.grip_loss = mix_loss(pr, r.mixing_weights, eta);
  r.objective = expect(pr.probs, r.grip_loss);
  r.opt_gap = fw_gap(s, eta);
  r.iterations = iters;
  return r;
}

}  // namespace detail

// GRIP at rate eta: entropic mirror descent over the simplex with Armijo backtracking,
// stopped when the Frank-Wolfe gap certifies tol-optimality.
inline GripResult compute_grip(const FiniteProblem& pr, double eta, const GripOptions& opt = {}) {
  if (!(eta > 0.0)) throw std::domain_error("compute_grip: eta must be positive");
  const std::size_t k = pr.num_predictors(), nz = pr.num_outcomes();
  Matrix a(k, nz);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t z = 0; z < nz; ++z) a(f, z) = pr.loss(f, z) == inf ? -inf : -eta * pr.loss(f, z);

  std::vector<double> logq(k, -std::log(static_cast<double>(k)));
  detail::GripState s = detail::grip_state(a, pr.probs, logq, eta);
  if (s.objective == inf) throw std::domain_error("compute_grip: mix loss is infinite for the uniform mixture");
  if (k == 1) return detail::make_result(pr, logq, s, eta, 0);

  double step = 1.0;  // step on the scale of E[ratio], i.e. eta times the gradient step
  std::vector<double> trial(k);
  std::size_t it = 0;
  for (; it < opt.max_iter; ++it) {
    if (detail::fw_gap(s, eta) <= opt.tol) return detail::make_result(pr, logq, s, eta, it);
    // directional derivative of the objective along the update, for the Armijo test
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t f = 0; f < k; ++f) trial[f] = logq[f] == -inf ? -inf : logq[f] + step * s.ratio[f];
      double z = log_sum_exp(trial);
      for (auto& t : trial) t = t == -inf ? -inf : t - z;
      detail::GripState ns = detail::grip_state(a, pr.probs, trial, eta);
      double lin = 0.0;  // <grad, q_new - q_old>
      for (std::size_t f = 0; f < k; ++f) {
        double qn = trial[f] == -inf ? 0.0 : std::exp(trial[f]);
        double qo = logq[f] == -inf ? 0.0 : std::exp(logq[f]);
        lin += -((s.ratio[f] - 1.0) / eta) * (qn - qo);
      }
      if (detail::objective_change(a, pr.probs, s, logq, trial, eta) <= 1e-4 * lin) {
        logq.swap(trial);
        s = std::move(ns);
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (accepted) continue;
    // Multiplicative steps cannot revive a coordinate driven to ~0; fall back to an exact
    // line search toward the vertex with the largest ratio.
    std::size_t j = 0;
    for (std::size_t f = 1; f < k; ++f)
      if (s.ratio[f] > s.ratio[j]) j = f;
    auto slope = [&](double g) {  // derivative of E[log(1 + g (w_j - 1))]
      double d = 0.0;
      for (std::size_t z = 0; z < nz; ++z) {
        if (pr.probs[z] == 0.0) continue;
        double w = a(j, z) == -inf ? 0.0 : std::exp(a(j, z) - s.lxi[z]);
        d += pr.probs[z] * (w - 1.0) / (1.0 + g * (w - 1.0));
      }
      return d;
    };
    double lo = 0.0, hi = 1.0;
    if (slope(1.0) > 0.0) {
      lo = 1.0;
    } else {
      for (int b = 0; b < 200 && hi - lo > 1e-18; ++b) {
        double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
    }
    if (!(lo > 0.0)) break;  // no representable descent left
    for (std::size_t f = 0; f < k; ++f) {
      double q = logq[f] == -inf ? 0.0 : std::exp(logq[f]);
      double nq = (1.0 - lo) * q + (f == j ? lo : 0.0);
      trial[f] = nq > 0.0 ? std::log(nq) : -inf;
    }
    if (!(detail::objective_change(a, pr.probs, s, logq, trial, eta) < 0.0)) break;
    logq.swap(trial);
    s = detail::grip_state(a, pr.probs, logq, eta);
    step = 1.0;
  }
  GripResult best = detail::make_result(pr, logq, s, eta, it);
  if (best.opt_gap <= opt.tol) return best;
  std::ostringstream msg;
  msg << "compute_grip: Frank-Wolfe gap " << best.opt_gap << " above tolerance " << opt.tol;
  throw GripNonConvergence(msg.str(), best);
}

struct MiniGripResult {
  double alpha = 0.0;
  std::vector<double> grip_loss;
  double objective = 0.0;
};

namespace detail {
// Derivative of alpha -> E[-(1/eta) log((1-alpha) x* + alpha x_f)], in units of -1/eta.
inline double mini_grip_slope(std::span<const double> probs, std::span<const double> as, std::span<const double> af,
                              double alpha) {
  double d = 0.0;
  for (std::size_t z = 0; z < probs.size(); ++z) {
    if (probs[z] == 0.0) continue;
    double hi = std::max(as[z], af[z]);
    double xs = as[z] == -inf ? 0.0 : std::exp(as[z] - hi), xf = af[z] == -inf ? 0.0 : std::exp(af[z] - hi);
    double xi = (1.0 - alpha) * xs + alpha * xf;
    if (xi == 0.0) return xf > xs ? inf : -inf;
    d += probs[z] * (xf - xs) / xi;
  }
  return d;  // objective derivative is -d / eta
}
}  // namespace detail

inline std::vector<double> mini_grip_loss(std::span<const double> ls, std::span<const double> lf, double alpha, double eta) {
  std::vector<double> g(ls.size());
  for (std::size_t z = 0; z < g.size(); ++z) {
    double t[2] = {alpha < 1.0 && ls[z] < inf ? std::log1p(-alpha) - eta * ls[z] : -inf,
                   alpha > 0.0 && lf[z] < inf ? std::log(alpha) - eta * lf[z] : -inf};
    double l = log_sum_exp(t);
    g[z] = l == -inf ? inf : -l / eta;
  }
  return g;
}

// Mini-GRIP of {comparator, f}: the best two-point mixture. The slope of the convex
// one-dimensional objective is bisected to width tol.
inline MiniGripResult compute_mini_grip(const FiniteProblem& pr, std::size_t f, double eta, double tol = 1e-13,
                                        std::optional<std::size_t> comparator = std::nullopt) {
  if (!(eta > 0.0)) throw std::domain_error("compute_mini_grip: eta must be positive");
  const std::size_t cs = comparator ? *comparator : comparator_of(pr);
  auto ls = pr.loss.row(cs), lf = pr.loss.row(f);
  MiniGripResult r;
  if (f != cs) {
    std::vector<double> as(ls.size()), af(lf.size());
    for (std::size_t z = 0; z < as.size(); ++z) {
      as[z] = ls[z] == inf ? -inf : -eta * ls[z];
      af[z] = lf[z] == inf ? -inf : -eta * lf[z];
    }
    if (detail::mini_grip_slope(pr.probs, as, af, 0.0) <= 0.0) {
      r.alpha = 0.0;
    } else if (detail::mini_grip_slope(pr.probs, as, af, 1.0) >= 0.0) {
      r.alpha = 1.0;
    } else {
      double lo = 0.0, hi = 1.0;
      while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (detail::mini_grip_slope(pr.probs, as, af, mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      r.alpha = 0.5 * (lo + hi);
    }
  }
  r.grip_loss = mini_grip_loss(ls, lf, r.alpha, eta);
  r.objective = expect(pr.probs, r.grip_loss);
  return r;
}

struct GripCentralReport {
  double max_moment = 0.0;  // max_f E[exp(eta (g - loss_f))]
  std::size_t argmax = 0;
  double slack = 0.0;
  bool holds = false;
  double comparator_risk = 0.0;
  double grip_risk = 0.0;  // E[g] <= E[loss_{f*}]
};

inline GripCentralReport verify_grip_central(const FiniteProblem& pr, const GripResult& g, double tol = 1e-10) {
  GripCentralReport r;
  r.slack = g.eta * g.opt_gap + tol;
  for (std::size_t f = 0; f < pr.num_predictors(); ++f) {
    double m = esi_moment(pr.probs, g.grip_loss, pr.loss.row(f), g.eta);
    if (m > r.max_moment) {
      r.max_moment = m;
      r.argmax = f;
    }
  }
  r.comparator_risk = risk(pr, comparator_of(pr));
  r.grip_risk = g.objective;
  r.holds = r.max_moment <= 1.0 + r.slack && r.grip_risk <= r.comparator_risk + r.slack / g.eta;
  return r;
}

struct InequalityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
};

// Hellinger-transformed excess over the mini-GRIP at eta against the excess over the
// GRIP at eta/2.
inline InequalityReport verify_minigrip_to_grip(const FiniteProblem& pr, std::size_t f, double eta,
                                                const GripResult& grip, double tol = 1e-10) {
  if (std::abs(grip.eta - eta) > 1e-15 * eta) throw std::invalid_argument("minigrip_to_grip: GRIP computed at another rate");
  MiniGripResult mg = compute_mini_grip(pr, f, eta);
  auto lf = pr.loss.row(f);
  auto d1 = loss_difference(pr.probs, lf, mg.grip_loss);
  auto d2 = loss_difference(pr.probs, lf, grip.grip_loss);
  InequalityReport r;
  r.lhs = hellinger_expectation(pr.probs, d1, eta);
  r.rhs = hellinger_expectation(pr.probs, d2, eta / 2.0);
  r.slack = grip.opt_gap + tol;
  r.holds = r.lhs <= r.rhs + r.slack;
  return r;
}

// E[loss_{f*}] - E[g_eta]: the pseudo-probability convexity gap at rate eta.
struct PpcGap {
  double eta = 0.0;
  double gap = 0.0;      // computed gap, a lower bound on the exact gap
  double opt_gap = 0.0;  // exact gap <= gap + opt_gap
};

inline PpcGap ppc_gap(const FiniteProblem& pr, double eta, const GripOptions& opt = {}) {
  GripResult g = compute_grip(pr, eta, opt);
  return {eta, risk(pr, comparator_of(pr)) - g.objective, g.opt_gap};
}

}  // namespace fastrates

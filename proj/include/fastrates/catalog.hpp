#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastrates/conditions.hpp"
#include "fastrates/expfam.hpp"
#include "fastrates/mc.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

// sum_{j > J} 1/j^2 by Euler-Maclaurin; accurate to double precision for J >= 100.
inline double inverse_square_tail(std::size_t J) {
  if (J < 100) {
    double s = std::numbers::pi * std::numbers::pi / 6.0;
    for (std::size_t j = 1; j <= J; ++j) s -= 1.0 / (static_cast<double>(j) * static_cast<double>(j));
    return s;
  }
  const double x = static_cast<double>(J);
  const double x2 = x * x;
  return 1.0 / x - 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x2 * x2 * x) + 1.0 / (42.0 * x2 * x2 * x2 * x);
}

// ---- squared loss, bounded excess risk, unbounded second moment ----
//
// X in {0, 1, 2, ...} with P(0) = P(1) = a/2, P(j) = 1/j^2 for j >= 2, a = 2 - pi^2/6;
// Y = 0. f_1(1) = 1/2 and 0 elsewhere; f_j(0) = 1, f_j(j) = j and 0 elsewhere.
namespace no_bernstein_bounded {

inline double a() { return 2.0 - std::numbers::pi * std::numbers::pi / 6.0; }
inline double excess_risk() { return 3.0 * a() / 8.0 + 1.0; }
inline double second_moment(double j) { return a() / 2.0 + a() / 32.0 + j * j; }
inline double truncated_excess() { return 3.0 * a() / 8.0; }  // E[L 1{L <= 1}]

// Smallest j >= 2 with E[L_j^2] > B E[L_j]^beta.
inline double bernstein_violator(double beta, double B) {
  const double need = B * std::pow(excess_risk(), beta) - a() / 2.0 - a() / 32.0;
  if (need < 4.0) return 2.0;
  return std::floor(std::sqrt(need)) + 1.0;
}

// Outcomes x = 0, 1, 2, ..., J and a lumped outcome for x > J where every kept
// predictor is 0, so the truncation changes no excess loss.
inline FiniteProblem problem(std::size_t J) {
  if (J < 2) throw std::invalid_argument("no_bernstein_bounded: need J >= 2");
  const std::size_t nz = J + 2;
  std::vector<double> probs(nz, 0.0), y(nz, 0.0);
  probs[0] = probs[1] = a() / 2.0;
  for (std::size_t j = 2; j <= J; ++j) probs[j] = 1.0 / (static_cast<double>(j) * static_cast<double>(j));
  probs[J + 1] = inverse_square_tail(J);
  Matrix pred(J, nz, 0.0);  // row 0 is f_1, row j-1 is f_j
  pred(0, 1) = 0.5;
  for (std::size_t j = 2; j <= J; ++j) {
    pred(j - 1, 0) = 1.0;
    pred(j - 1, j) = static_cast<double>(j);
  }
  FiniteProblem pr = squared_loss_problem(std::move(probs), y, pred);
  pr.labels.resize(J);
  for (std::size_t j = 1; j <= J; ++j) pr.labels[j - 1] = "f" + std::to_string(j);
  pr.outcomes.resize(nz);
  for (std::size_t x = 0; x <= J; ++x) pr.outcomes[x] = "x=" + std::to_string(x);
  pr.outcomes[J + 1] = "x>" + std::to_string(J);
  return pr;
}

// log E[exp(kappa L_j)] = log(a/2 e^kappa + a/2 e^{-kappa/4} + e^{kappa j^2}/j^2 + rest)
inline double log_exp_moment(double kappa, double j) {
  const double A = a();
  std::vector<double> terms{std::log(A / 2.0) + kappa, std::log(A / 2.0) - kappa / 4.0, kappa * j * j - 2.0 * std::log(j),
                            std::log(1.0 - A - 1.0 / (j * j))};
  return log_sum_exp(terms);
}

}  // namespace no_bernstein_bounded

// ---- squared loss, indicator predictors, small-ball fails ----
//
// X in {1, 2, ...} with p_j = 1/(a j^2), a = pi^2/6; Y ~ N(0, 1) independent;
// f_0 = 0 and f_j = 1{x = j}. Excess loss of f_j is 1 - 2Y on {X = j} and 0 otherwise.
class NoSmallBall {
 public:
  NoSmallBall(std::size_t J, std::size_t nodes = 401) : J_(J), y_(gaussian_on_grid(0.0, 1.0, nodes)) {
    if (J < 1) throw std::invalid_argument("NoSmallBall: need J >= 1");
    const double a = std::numbers::pi * std::numbers::pi / 6.0;
    p_.resize(J + 1, 0.0);
    for (std::size_t j = 1; j <= J; ++j) p_[j] = 1.0 / (a * static_cast<double>(j) * static_cast<double>(j));
  }
  std::size_t size() const { return J_ + 1; }
  std::size_t comparator() const { return 0; }
  double p(std::size_t j) const { return p_.at(j); }
  const GridDistribution& noise() const { return y_; }

  Distribution excess_distribution(std::size_t j) const {
    if (j == 0) return {{0.0}, {1.0}};
    Distribution d;
    for (std::size_t k = 0; k < y_.mass.size(); ++k) {
      d.values.push_back(1.0 - 2.0 * y_.grid.nodes[k]);
      d.probs.push_back(p_[j] * y_.mass[k]);
    }
    d.values.push_back(0.0);
    d.probs.push_back(1.0 - p_[j]);
    return d;
  }

  // |f - h| over X in {1, ..., J} plus a lumped x > J where all kept predictors vanish.
  Distribution difference_distribution(std::size_t f, std::size_t h) const {
    Distribution d;
    double kept = 0.0;
    for (std::size_t x = 1; x <= J_; ++x) {
      double fv = (f == x) ? 1.0 : 0.0, hv = (h == x) ? 1.0 : 0.0;
      d.values.push_back(std::abs(fv - hv));
      d.probs.push_back(p_[x]);
      kept += p_[x];
    }
    d.values.push_back(0.0);
    d.probs.push_back(std::max(0.0, 1.0 - kept));
    return d;
  }

 private:
  std::size_t J_;
  GridDistribution y_;
  std::vector<double> p_;
};

// ---- well-specified unit-variance Gaussian location under log loss ----
//
// Predictor k sits at distance nu_k from the truth; its excess loss is nu^2/2 + nu Z with
// Z ~ N(0, 1). Index 0 is the truth (nu = 0).
class GaussianLocationShift {
 public:
  GaussianLocationShift(std::vector<double> nus, std::size_t nodes = 801, double width = 14.0)
      : nus_(std::move(nus)), z_(gaussian_on_grid(0.0, 1.0, nodes, width)) {
    if (nus_.empty() || nus_[0] != 0.0) throw std::invalid_argument("GaussianLocationShift: first offset must be 0");
  }
  std::size_t size() const { return nus_.size(); }
  std::size_t comparator() const { return 0; }
  double nu(std::size_t k) const { return nus_.at(k); }

  Distribution excess_distribution(std::size_t k) const {
    const double v = nus_.at(k);
    Distribution d{std::vector<double>(z_.mass.size()), z_.mass};
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = 0.5 * v * v + v * z_.grid.nodes[i];
    return d;
  }

 private:
  std::vector<double> nus_;
  GridDistribution z_;
};

// ---- the family whose badness is never witnessed ----
//
// f_j, j >= 2: excess loss -1/(1 - 1/j) w.p. 1 - 1/j and 2j w.p. 1/j, so E[L] = 1.
class UnwitnessedFamily {
 public:
  explicit UnwitnessedFamily(std::size_t J) : J_(J) {
    if (J < 2) throw std::invalid_argument("UnwitnessedFamily: need J >= 2");
  }
  std::size_t size() const { return J_; }  // index 0 is f*, index i >= 1 is f_{i+1}
  std::size_t comparator() const { return 0; }
  Distribution excess_distribution(std::size_t i) const {
    if (i == 0) return {{0.0}, {1.0}};
    const double j = static_cast<double>(i + 1);
    return {{-1.0 / (1.0 - 1.0 / j), 2.0 * j}, {1.0 - 1.0 / j, 1.0 / j}};
  }

 private:
  std::size_t J_;
};

// ---- small random instances ----

inline std::vector<double> random_probs(Rng& rng, std::size_t k, double alpha = 1.0) { return dirichlet_draw(rng, k, alpha); }

// Loss entries uniform on [0, scale).
inline FiniteProblem random_problem(Rng& rng, std::size_t nz, std::size_t nf, double scale = 1.0) {
  Matrix loss(nf, nz);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t z = 0; z < nz; ++z) loss(f, z) = scale * uniform01(rng);
  return make_problem(random_probs(rng, nz), std::move(loss));
}

// Density model {p_f}; with well_specified the truth is p_0.
struct DensityModel {
  std::vector<double> truth;
  std::vector<std::vector<double>> densities;
  FiniteProblem problem;
};

inline DensityModel random_density_model(Rng& rng, std::size_t nz, std::size_t nf, bool well_specified, double alpha = 1.0) {
  DensityModel m;
  for (std::size_t f = 0; f < nf; ++f) m.densities.push_back(dirichlet_draw(rng, nz, alpha));
  m.truth = well_specified ? m.densities[0] : dirichlet_draw(rng, nz, alpha);
  // keep densities strictly positive so every risk is finite
  for (auto& d : m.densities) {
    double s = 0.0;
    for (auto& x : d) s += (x = std::max(x, 1e-12));
    for (auto& x : d) x /= s;
  }
  if (well_specified) m.truth = m.densities[0];
  m.problem = log_loss_problem(m.truth, Matrix::from_rows(m.densities), {}, false);
  if (well_specified) m.problem.comparator_index = 0;
  return m;
}

// A pair (p, q) with p / q <= V everywhere.
inline std::pair<std::vector<double>, std::vector<double>> random_bounded_ratio_pair(Rng& rng, std::size_t nz, double V) {
  if (!(V > 1.0)) throw std::domain_error("random_bounded_ratio_pair: V must exceed 1");
  auto q = dirichlet_draw(rng, nz);
  for (auto& x : q) x = std::max(x, 1e-9);
  double s = sum(q);
  for (auto& x : q) x /= s;
  std::vector<double> w(nz), p(nz);
  double z = 0.0;
  for (std::size_t i = 0; i < nz; ++i) z += q[i] * (w[i] = 1.0 + (V - 1.0) * uniform01(rng));
  for (std::size_t i = 0; i < nz; ++i) p[i] = q[i] * w[i] / z;
  return {p, q};
}

// Squared loss with responses N(0, 1) and predictions uniform on [-r, r].
inline FiniteProblem random_squared_problem(Rng& rng, std::size_t nz, std::size_t nf, double r = 2.0) {
  std::vector<double> y(nz);
  for (auto& v : y) v = standard_normal(rng);
  Matrix pred(nf, nz);
  for (std::size_t f = 0; f < nf; ++f)
    for (std::size_t z = 0; z < nz; ++z) pred(f, z) = r * (2.0 * uniform01(rng) - 1.0);
  return squared_loss_problem(random_probs(rng, nz), y, pred);
}

// A problem with a prescribed strong central margin: starts from a well-specified
// density model, so eta_bar >= 1 holds by construction.
inline FiniteProblem random_central_problem(Rng& rng, std::size_t nz, std::size_t nf) {
  return random_density_model(rng, nz, nf, true).problem;
}

// ---- squared loss with a polynomial tail ----
//
// Y on {0, 1, ..., ymax} with mass proportional to (1 + y)^{-power}; constant predictors.
// Exponential moments of the excess loss blow up with ymax while the fourth moment of
// the comparator's loss stays bounded once power > 5.
inline FiniteProblem heavy_tail_regression(std::size_t ymax, double power, const std::vector<double>& predictions) {
  if (predictions.empty()) throw std::invalid_argument("heavy_tail_regression: no predictions");
  const std::size_t nz = ymax + 1;
  std::vector<double> probs(nz), y(nz);
  for (std::size_t k = 0; k < nz; ++k) {
    y[k] = static_cast<double>(k);
    probs[k] = std::pow(1.0 + y[k], -power);
  }
  double s = sum(probs);
  for (auto& p : probs) p /= s;
  Matrix pred(predictions.size(), nz);
  for (std::size_t f = 0; f < predictions.size(); ++f)
    for (std::size_t z = 0; z < nz; ++z) pred(f, z) = predictions[f];
  return squared_loss_problem(std::move(probs), y, pred);
}

// Squared loss, constant predictors theta on a grid, response with finite variance.
// Small-ball holds against the comparator (|f - f*| is constant) and the excess risk
// grows as (theta - theta*)^2, so risks are not uniformly bounded as the grid widens.
inline FiniteProblem location_regression(const GridDistribution& Y, const std::vector<double>& thetas) {
  Matrix pred(thetas.size(), Y.mass.size());
  for (std::size_t f = 0; f < thetas.size(); ++f)
    for (std::size_t z = 0; z < Y.mass.size(); ++z) pred(f, z) = thetas[f];
  return squared_loss_problem(Y.mass, Y.grid.nodes, pred);
}

// Two predictors with equal risk: strong central fails for every eta > 0 while
// v(eps) = eps central holds.
inline FiniteProblem tied_pair_problem() {
  Matrix loss(2, 3);
  // excess loss of row 1 against row 0: -1, +1, 0 with masses 0.25, 0.25, 0.5
  loss(0, 0) = 2.0;
  loss(0, 1) = 1.0;
  loss(0, 2) = 1.0;
  loss(1, 0) = 1.0;
  loss(1, 1) = 2.0;
  loss(1, 2) = 1.0;
  FiniteProblem pr = make_problem({0.25, 0.25, 0.5}, std::move(loss));
  pr.comparator_index = 0;
  return pr;
}

}  // namespace fastrates

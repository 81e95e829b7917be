#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fastrates/numeric.hpp"

namespace fastrates {

// A learning problem (P, loss, F) on finite outcome and predictor sets.
struct FiniteProblem {
  std::vector<std::string> outcomes;
  std::vector<double> probs;
  Matrix loss;  // |F| x |Z|, entries finite or +inf
  std::vector<std::string> labels;
  // Optional |F| x |Z| table of predictions f(x(z)); needed by small-ball checks.
  std::optional<Matrix> predictions;
  std::optional<std::size_t> comparator_index;

  std::size_t num_outcomes() const { return probs.size(); }
  std::size_t num_predictors() const { return loss.rows(); }
  std::span<const double> loss_row(std::size_t f) const { return loss.row(f); }
};

inline double risk(const FiniteProblem& pr, std::size_t f) {
  if (f >= pr.num_predictors()) throw std::out_of_range("risk: predictor index out of range");
  return expect(pr.probs, pr.loss.row(f));
}

inline std::vector<double> risks(const FiniteProblem& pr) {
  std::vector<double> r(pr.num_predictors());
  for (std::size_t f = 0; f < r.size(); ++f) r[f] = risk(pr, f);
  return r;
}

// Risk minimizer, smallest index on ties.
inline std::size_t find_comparator(const FiniteProblem& pr) {
  std::size_t best = 0;
  double br = inf;
  for (std::size_t f = 0; f < pr.num_predictors(); ++f) {
    double r = risk(pr, f);
    if (r < br) {
      br = r;
      best = f;
    }
  }
  if (br == inf) throw std::domain_error("find_comparator: all risks are infinite");
  return best;
}

inline std::size_t comparator_of(const FiniteProblem& pr) {
  return pr.comparator_index ? *pr.comparator_index : find_comparator(pr);
}

inline double excess_risk(const FiniteProblem& pr, std::size_t f, std::size_t comparator) {
  double rc = risk(pr, comparator);
  if (rc == inf) throw std::domain_error("excess_risk: comparator has infinite risk");
  double rf = risk(pr, f);
  return rf == inf ? inf : rf - rc;
}

inline void validate(const FiniteProblem& pr) {
  const std::size_t nz = pr.probs.size();
  if (nz == 0) throw std::invalid_argument("problem: no outcomes");
  if (pr.loss.rows() == 0) throw std::invalid_argument("problem: no predictors");
  if (pr.loss.cols() != nz) throw std::invalid_argument("problem: loss matrix width differs from |Z|");
  if (!pr.outcomes.empty() && pr.outcomes.size() != nz)
    throw std::invalid_argument("problem: outcome labels length differs from |Z|");
  if (!pr.labels.empty() && pr.labels.size() != pr.loss.rows())
    throw std::invalid_argument("problem: predictor labels length differs from |F|");
  for (double p : pr.probs)
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("problem: probabilities must be finite and >= 0");
  if (std::abs(sum(pr.probs) - 1.0) > 1e-12) throw std::invalid_argument("problem: probabilities must sum to 1");
  for (double v : pr.loss.data())
    if (std::isnan(v) || v == -inf) throw std::invalid_argument("problem: loss entries must be finite or +inf");
  if (pr.predictions && (pr.predictions->rows() != pr.loss.rows() || pr.predictions->cols() != nz))
    throw std::invalid_argument("problem: prediction table shape differs from loss matrix");
  bool finite_one = false;
  for (std::size_t f = 0; f < pr.num_predictors(); ++f) finite_one = finite_one || risk(pr, f) < inf;
  if (!finite_one) throw std::invalid_argument("problem: every predictor has infinite risk");
  if (pr.comparator_index && *pr.comparator_index >= pr.num_predictors())
    throw std::invalid_argument("problem: comparator index out of range");
}

inline FiniteProblem make_problem(std::vector<double> probs, Matrix loss,
                                  std::vector<std::string> outcomes = {},
                                  std::vector<std::string> labels = {}) {
  FiniteProblem pr;
  pr.probs = std::move(probs);
  pr.loss = std::move(loss);
  pr.outcomes = std::move(outcomes);
  pr.labels = std::move(labels);
  validate(pr);
  return pr;
}

// Squared loss: outcome z carries a response y(z); predictions(f, z) = f(x(z)).
inline FiniteProblem squared_loss_problem(std::vector<double> probs, std::span<const double> y,
                                          const Matrix& predictions) {
  if (y.size() != probs.size() || predictions.cols() != probs.size())
    throw std::invalid_argument("squared_loss_problem: dimension mismatch");
  Matrix loss(predictions.rows(), predictions.cols());
  for (std::size_t f = 0; f < loss.rows(); ++f)
    for (std::size_t z = 0; z < loss.cols(); ++z) {
      double d = y[z] - predictions(f, z);
      loss(f, z) = d * d;
    }
  FiniteProblem pr = make_problem(std::move(probs), std::move(loss));
  pr.predictions = predictions;
  return pr;
}

inline FiniteProblem zero_one_problem(std::vector<double> probs, std::span<const double> y,
                                      const Matrix& predictions) {
  if (y.size() != probs.size() || predictions.cols() != probs.size())
    throw std::invalid_argument("zero_one_problem: dimension mismatch");
  Matrix loss(predictions.rows(), predictions.cols());
  for (std::size_t f = 0; f < loss.rows(); ++f)
    for (std::size_t z = 0; z < loss.cols(); ++z) loss(f, z) = predictions(f, z) == y[z] ? 0.0 : 1.0;
  FiniteProblem pr = make_problem(std::move(probs), std::move(loss));
  pr.predictions = predictions;
  return pr;
}

// Log loss: loss(f, z) = -log density(f, z). With base weights w, a row is a density
// when sum_z w(z) density(f, z) = 1; require_normalized enforces this to 1e-12.
inline FiniteProblem log_loss_problem(std::vector<double> probs, const Matrix& density,
                                      std::span<const double> base_weights = {},
                                      bool require_normalized = true) {
  if (density.cols() != probs.size()) throw std::invalid_argument("log_loss_problem: dimension mismatch");
  if (!base_weights.empty() && base_weights.size() != probs.size())
    throw std::invalid_argument("log_loss_problem: base weight length mismatch");
  Matrix loss(density.rows(), density.cols());
  for (std::size_t f = 0; f < density.rows(); ++f) {
    double s = 0.0;
    for (std::size_t z = 0; z < density.cols(); ++z) {
      double d = density(f, z);
      if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("log_loss_problem: densities must be finite and >= 0");
      s += (base_weights.empty() ? 1.0 : base_weights[z]) * d;
      loss(f, z) = d == 0.0 ? inf : -std::log(d);
    }
    if (require_normalized && std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("log_loss_problem: density row does not integrate to 1");
  }
  return make_problem(std::move(probs), std::move(loss));
}

// The reference an excess loss is measured against: a predictor or a pseudo-loss.
struct Comparator {
  std::variant<std::size_t, std::vector<double>> ref;

  static Comparator index(std::size_t f) { return {f}; }
  static Comparator pseudo(std::vector<double> g) { return {std::move(g)}; }

  std::span<const double> loss(const FiniteProblem& pr) const {
    if (auto* i = std::get_if<std::size_t>(&ref)) return pr.loss.row(*i);
    const auto& g = std::get<std::vector<double>>(ref);
    if (g.size() != pr.num_outcomes()) throw std::invalid_argument("comparator: pseudo-loss length differs from |Z|");
    return g;
  }
};

// L(z) = a(z) - b(z) where defined; zero-mass outcomes map to 0.
inline std::vector<double> loss_difference(std::span<const double> probs, std::span<const double> a,
                                           std::span<const double> b) {
  std::vector<double> d(probs.size(), 0.0);
  for (std::size_t z = 0; z < probs.size(); ++z) {
    if (probs[z] == 0.0) continue;
    if (b[z] == inf) throw std::domain_error("excess loss undefined: comparator loss is +inf on a mass-carrying outcome");
    d[z] = a[z] == inf ? inf : a[z] - b[z];
  }
  return d;
}

inline std::vector<double> excess_loss(const FiniteProblem& pr, std::size_t f, const Comparator& cmp) {
  if (f >= pr.num_predictors()) throw std::out_of_range("excess_loss: predictor index out of range");
  return loss_difference(pr.probs, pr.loss.row(f), cmp.loss(pr));
}

inline std::vector<double> excess_loss(const FiniteProblem& pr, std::size_t f) {
  return excess_loss(pr, f, Comparator::index(comparator_of(pr)));
}

// A random variable on a finite space: values with their probabilities.
struct Distribution {
  std::vector<double> values;
  std::vector<double> probs;
};

// Anything that can hand out the distribution of each predictor's excess loss.
// Finite problems satisfy it through ProblemFamily; structured infinite families
// (truncated, with quadrature in the outcome) implement it directly.
template <class T>
concept ExcessLossFamily = requires(const T& t, std::size_t f) {
  { t.size() } -> std::convertible_to<std::size_t>;
  { t.comparator() } -> std::convertible_to<std::size_t>;
  { t.excess_distribution(f) } -> std::convertible_to<Distribution>;
};

class ProblemFamily {
 public:
  explicit ProblemFamily(const FiniteProblem& pr) : pr_(&pr), cmp_(comparator_of(pr)) {}
  ProblemFamily(const FiniteProblem& pr, std::size_t comparator) : pr_(&pr), cmp_(comparator) {}

  std::size_t size() const { return pr_->num_predictors(); }
  std::size_t comparator() const { return cmp_; }
  Distribution excess_distribution(std::size_t f) const {
    return {excess_loss(*pr_, f, Comparator::index(cmp_)), pr_->probs};
  }
  const FiniteProblem& problem() const { return *pr_; }

 private:
  const FiniteProblem* pr_;
  std::size_t cmp_;
};

}  // namespace fastrates

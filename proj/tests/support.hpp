#pragma once

// Small generators and brute-force oracles shared by the test binaries.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fastrates/catalog.hpp"
#include "fastrates/estimators.hpp"
#include "fastrates/grip.hpp"
#include "fastrates/mc.hpp"
#include "fastrates/problem.hpp"

namespace testing_support {

using namespace fastrates;

inline Sample random_sample(Rng& rng, const FiniteProblem& pr, std::size_t n) {
  DiscreteSampler draw(pr.probs);
  Sample s(n);
  for (auto& z : s) z = draw(rng);
  return s;
}

inline std::size_t uniform_index(Rng& rng, std::size_t k) {
  return std::min(k - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k)));
}

inline std::vector<double> random_values(Rng& rng, std::size_t k, double lo, double hi) {
  std::vector<double> v(k);
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

inline WeightVector random_prior(Rng& rng, std::size_t k) {
  auto w = dirichlet_draw(rng, k);
  for (auto& x : w) x = std::max(x, 1e-6);
  double s = 0.0;
  for (double x : w) s += x;
  for (auto& x : w) x /= s;
  return WeightVector(w, 1e-9);
}

// Best mix-loss objective over a grid on the simplex of |F| <= 3 predictors.
inline double grip_grid_oracle(const FiniteProblem& pr, double eta, double step) {
  const std::size_t k = pr.num_predictors();
  const int m = static_cast<int>(std::lround(1.0 / step));
  double best = inf;
  auto eval = [&](std::vector<double> q) {
    WeightVector w;
    w.weights = std::move(q);
    best = std::min(best, mix_objective(pr, w, eta));
  };
  if (k == 1) {
    eval({1.0});
  } else if (k == 2) {
    for (int i = 0; i <= m; ++i) {
      double a = static_cast<double>(i) / m;
      eval({1.0 - a, a});
    }
  } else {
    for (int i = 0; i <= m; ++i)
      for (int j = 0; i + j <= m; ++j) {
        double a = static_cast<double>(i) / m, b = static_cast<double>(j) / m;
        eval({std::max(0.0, 1.0 - a - b), a, b});
      }
  }
  return best;
}

// Golden-section refinement of the two-point mixture, as an independent oracle.
inline double two_point_oracle(const FiniteProblem& pr, double eta) {
  auto obj = [&](double a) {
    WeightVector w;
    w.weights = {1.0 - a, a};
    return mix_objective(pr, w, eta);
  };
  double lo = 0.0, hi = 1.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (obj(x1) < obj(x2))
      hi = x2;
    else
      lo = x1;
  }
  return std::min({obj(0.0), obj(1.0), obj(0.5 * (lo + hi))});
}

}  // namespace testing_support

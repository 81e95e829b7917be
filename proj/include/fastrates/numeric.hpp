#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastrates {

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline bool is_pos_inf(double x) { return x == inf; }

// Extended-real product with the measure-zero convention 0 * inf = 0.
inline double mass_times(double p, double x) {
  if (p == 0.0) return 0.0;
  return p * x;
}

// Sum_i p_i x_i, skipping zero-mass entries; +inf if a mass-carrying entry is +inf.
inline double expect(std::span<const double> p, std::span<const double> x) {
  if (p.size() != x.size()) throw std::invalid_argument("expect: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (x[i] == inf) return inf;
    s += p[i] * x[i];
  }
  return s;
}

inline double log_sum_exp(std::span<const double> a) {
  double m = -inf;
  for (double v : a) m = std::max(m, v);
  if (m == -inf) return -inf;
  if (m == inf) return inf;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

// log E_p[exp(x)] for a probability vector p. Entries with x = -inf contribute 0,
// zero-mass entries are ignored. Uses an expm1/log1p path when |x| is small so the
// result keeps relative precision as x -> 0.
inline double log_mean_exp(std::span<const double> p, std::span<const double> x) {
  if (p.size() != x.size()) throw std::invalid_argument("log_mean_exp: dimension mismatch");
  double m = -inf;
  double amax = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (x[i] == inf) return inf;
    any = true;
    m = std::max(m, x[i]);
    amax = std::max(amax, std::abs(x[i]));
  }
  if (!any || m == -inf) return -inf;
  if (amax < 0.5) {
    double s = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) continue;
      s += p[i] * std::expm1(x[i]);
      tot += p[i];
    }
    // tot may differ from 1 by rounding; fold the defect in exactly
    return std::log1p(s + (tot - 1.0));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 || x[i] == -inf) continue;
    s += p[i] * std::exp(x[i] - m);
  }
  return m + std::log(s);
}

inline std::vector<double> normalize_log_weights(std::span<const double> logw) {
  double z = log_sum_exp(logw);
  if (!(z > -inf) || !std::isfinite(z))
    throw std::domain_error("normalize_log_weights: zero or infinite normalizer");
  std::vector<double> w(logw.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = logw[i] == -inf ? 0.0 : std::exp(logw[i] - z);
  return w;
}

inline double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline bool is_distribution(std::span<const double> p, double tol = 1e-12) {
  for (double x : p)
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
  return std::abs(sum(p) - 1.0) <= tol;
}

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw std::invalid_argument("Matrix: ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Bisection for the largest x in [lo, hi] with pred(x) true, assuming pred is
// true on an initial segment. Stops at relative width rel_tol.
template <class Pred>
double bisect_last_true(Pred pred, double lo, double hi, double rel_tol) {
  while (hi - lo > rel_tol * std::max(std::abs(lo), std::abs(hi)) && hi - lo > 1e-300) {
    double mid = 0.5 * (lo + hi);
    if (pred(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace fastrates

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fastrates/numeric.hpp"

namespace fastrates {

// |Z|^n as a double, for comparison against enumeration caps.
inline double product_states(std::size_t nz, std::size_t n) { return std::pow(static_cast<double>(nz), static_cast<double>(n)); }

// Visits every z^n in Z^n (lexicographic order) with its probability and, for each
// row r of `rows`, the running sum sum_i rows(r, z_i). Zero-probability prefixes are
// pruned since they contribute nothing to expectations.
template <class Visit>
void enumerate_samples(std::span<const double> probs, const Matrix& rows, std::size_t n, Visit&& visit) {
  const std::size_t nz = probs.size(), k = rows.rows();
  if (rows.cols() != nz) throw std::invalid_argument("enumerate_samples: row width differs from |Z|");
  std::vector<double> sums((n + 1) * k, 0.0);
  std::vector<double> mass(n + 1, 1.0);
  std::vector<std::size_t> sample(n, 0);
  auto rec = [&](auto&& self, std::size_t depth) -> void {
    if (depth == n) {
      visit(mass[n], std::span<const double>(sums.data() + n * k, k), std::span<const std::size_t>(sample));
      return;
    }
    for (std::size_t z = 0; z < nz; ++z) {
      if (probs[z] == 0.0) continue;
      sample[depth] = z;
      mass[depth + 1] = mass[depth] * probs[z];
      const double* prev = sums.data() + depth * k;
      double* cur = sums.data() + (depth + 1) * k;
      for (std::size_t r = 0; r < k; ++r) cur[r] = prev[r] + rows(r, z);
      self(self, depth + 1);
    }
  };
  rec(rec, 0);
}

}  // namespace fastrates

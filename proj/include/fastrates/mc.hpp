#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fastrates {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

// Independent stream for replicate k of a run seeded with `seed`.
inline Rng substream(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t s = seed ^ 0x5851f42d4c957f2dULL;
  std::uint64_t a = splitmix64(s);
  std::uint64_t t = a ^ (k * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(t)), static_cast<std::uint32_t>(splitmix64(t)),
                    static_cast<std::uint32_t>(splitmix64(t)), static_cast<std::uint32_t>(splitmix64(t))};
  return Rng(seq);
}

// Uniform on [0, 1) from the top 53 bits; portable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Gamma(a, 1) by Marsaglia-Tsang; a < 1 handled by the boosting identity.
inline double gamma_draw(Rng& rng, double a) {
  if (a < 1.0) {
    double u = 0.0;
    while (u == 0.0) u = uniform01(rng);
    return gamma_draw(rng, a + 1.0) * std::pow(u, 1.0 / a);
  }
  double d = a - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = standard_normal(rng), v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline std::vector<double> dirichlet_draw(Rng& rng, std::size_t k, double alpha = 1.0) {
  std::vector<double> w(k);
  double s = 0.0;
  for (auto& x : w) s += (x = gamma_draw(rng, alpha));
  for (auto& x : w) x /= s;
  return w;
}

// Inverse-CDF sampler over a finite distribution.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> p) : cdf_(p.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) cdf_[i] = (s += p[i]);
    if (!(s > 0.0)) throw std::invalid_argument("DiscreteSampler: zero total mass");
    for (auto& c : cdf_) c /= s;
    last_positive_ = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0) last_positive_ = i;
  }
  std::size_t operator()(Rng& rng) const {
    double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    return std::min(i, last_positive_);
  }

 private:
  std::vector<double> cdf_;
  std::size_t last_positive_;
};

// Streaming mean and variance with the pairwise combination rule.
struct RunningStats {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  void merge(const RunningStats& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    double n = count + o.count, d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
  }
  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double standard_error() const { return count > 0.0 ? std::sqrt(variance() / count) : 0.0; }
};

inline unsigned default_threads() {
  unsigned t = std::thread::hardware_concurrency();
  return t == 0 ? 1 : t;
}

// Runs f(rng_k, k) for k < reps and returns the outcomes in replicate order.
// The partition over threads does not affect the result.
template <class R, class F>
std::vector<R> mc_map(std::size_t reps, std::uint64_t seed, unsigned threads, F f) {
  std::vector<R> out(reps);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(reps, 1))));
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      Rng rng = substream(seed, k);
      out[k] = f(rng, k);
    }
  };
  if (threads == 1) {
    work(0, reps);
    return out;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (reps + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t lo = t * chunk, hi = std::min(reps, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(work, lo, hi);
  }
  for (auto& th : pool) th.join();
  return out;
}

// Fixed-shape pairwise reduction: blocks of 256 values, merged as a balanced tree.
inline RunningStats summarize(std::span<const double> xs) {
  constexpr std::size_t block = 256;
  std::vector<RunningStats> level;
  for (std::size_t lo = 0; lo < xs.size(); lo += block) {
    RunningStats s;
    for (std::size_t i = lo; i < std::min(xs.size(), lo + block); ++i) s.add(xs[i]);
    level.push_back(s);
  }
  if (level.empty()) return {};
  while (level.size() > 1) {
    std::vector<RunningStats> next;
    for (std::size_t i = 0; i < level.size(); i += 2) {
      RunningStats s = level[i];
      if (i + 1 < level.size()) s.merge(level[i + 1]);
      next.push_back(s);
    }
    level.swap(next);
  }
  return level[0];
}

template <class F>
RunningStats mc_mean(std::size_t reps, std::uint64_t seed, unsigned threads, F f) {
  auto xs = mc_map<double>(reps, seed, threads, f);
  return summarize(xs);
}

}  // namespace fastrates

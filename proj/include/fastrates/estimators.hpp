#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastrates/enumerate.hpp"
#include "fastrates/mc.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

// A distribution over predictors: prior, posterior, or mixing weights.
struct WeightVector {
  std::vector<double> weights;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> w, double tol = 1e-12) : weights(std::move(w)) {
    if (weights.empty()) throw std::invalid_argument("WeightVector: empty");
    if (!is_distribution(weights, tol)) throw std::invalid_argument("WeightVector: entries must be >= 0 and sum to 1");
  }
  static WeightVector uniform(std::size_t k) { return WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k)), 1e-9); }
  static WeightVector point_mass(std::size_t k, std::size_t i) {
    std::vector<double> w(k, 0.0);
    w.at(i) = 1.0;
    return WeightVector(std::move(w));
  }
  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

using Sample = std::vector<std::size_t>;

enum class EstimatorKind { Bayes, TwoPart, Erm, RandomPosterior };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Bayes: return "bayes";
    case EstimatorKind::TwoPart: return "twopart";
    case EstimatorKind::Erm: return "erm";
    default: return "random";
  }
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "bayes") return EstimatorKind::Bayes;
  if (s == "twopart") return EstimatorKind::TwoPart;
  if (s == "erm") return EstimatorKind::Erm;
  if (s == "random") return EstimatorKind::RandomPosterior;
  throw std::invalid_argument("unknown estimator: " + s);
}

// sum_i row_f(z_i) for every predictor.
inline std::vector<double> cumulative_loss(const FiniteProblem& pr, std::span<const std::size_t> sample) {
  std::vector<double> s(pr.num_predictors(), 0.0);
  for (std::size_t f = 0; f < s.size(); ++f)
    for (std::size_t z : sample) {
      if (z >= pr.num_outcomes()) throw std::out_of_range("sample outcome index out of range");
      s[f] += pr.loss(f, z);
    }
  return s;
}

inline double sample_sum(std::span<const double> g, std::span<const std::size_t> sample) {
  double s = 0.0;
  for (std::size_t z : sample) s += g[z];
  return s;
}

namespace detail {
inline void check_prior(const WeightVector& prior, std::size_t k) {
  if (prior.size() != k) throw std::invalid_argument("prior length differs from |F|");
}
inline double safe_log(double x) { return x > 0.0 ? std::log(x) : -inf; }
}  // namespace detail

// Posterior with weights proportional to prior(f) exp(-eta S_f), from cumulative losses S.
inline WeightVector bayes_from_cumulative(const WeightVector& prior, std::span<const double> cum, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("generalized Bayes: eta must be positive");
  std::vector<double> lw(prior.size());
  for (std::size_t f = 0; f < lw.size(); ++f)
    lw[f] = (prior[f] == 0.0 || cum[f] == inf) ? -inf : std::log(prior[f]) - eta * cum[f];
  bool any = std::any_of(lw.begin(), lw.end(), [](double x) { return x > -inf; });
  if (!any) throw std::domain_error("generalized Bayes: every prior-mass predictor has infinite sample loss");
  WeightVector w;
  w.weights = normalize_log_weights(lw);
  return w;
}

inline WeightVector generalized_bayes_posterior(const FiniteProblem& pr, const WeightVector& prior,
                                                std::span<const std::size_t> sample, double eta) {
  detail::check_prior(prior, pr.num_predictors());
  return bayes_from_cumulative(prior, cumulative_loss(pr, sample), eta);
}

// argmin_f S_f + (1/eta)(-log prior(f)), smallest index on ties.
inline std::size_t two_part_from_cumulative(const WeightVector& prior, std::span<const double> cum, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("two-part: eta must be positive");
  std::size_t best = 0;
  double bv = inf;
  for (std::size_t f = 0; f < prior.size(); ++f) {
    if (prior[f] == 0.0 || cum[f] == inf) continue;
    double v = cum[f] - std::log(prior[f]) / eta;
    if (v < bv) {
      bv = v;
      best = f;
    }
  }
  if (bv == inf) throw std::domain_error("two-part: objective is +inf for every predictor");
  return best;
}

inline std::size_t two_part_mdl(const FiniteProblem& pr, const WeightVector& prior, std::span<const std::size_t> sample,
                                double eta) {
  detail::check_prior(prior, pr.num_predictors());
  return two_part_from_cumulative(prior, cumulative_loss(pr, sample), eta);
}

// Variant for streamed or truncated countable lists, where the infimum need not be
// attained: the first index whose objective is within 1/n of the infimum.
inline std::size_t two_part_within_one_over_n(std::span<const double> objective, std::size_t n) {
  double m = inf;
  for (double v : objective) m = std::min(m, v);
  if (m == inf) throw std::domain_error("two-part: objective is +inf for every predictor");
  double slack = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t f = 0; f < objective.size(); ++f)
    if (objective[f] <= m + slack) return f;
  return 0;
}

inline std::size_t erm_from_cumulative(std::span<const double> cum) {
  std::size_t best = 0;
  for (std::size_t f = 1; f < cum.size(); ++f)
    if (cum[f] < cum[best]) best = f;
  return best;
}

inline std::size_t erm(const FiniteProblem& pr, std::span<const std::size_t> sample) {
  return erm_from_cumulative(cumulative_loss(pr, sample));
}

// Output of an estimator as a distribution over F; deterministic estimators give point masses.
inline WeightVector estimate_from_cumulative(EstimatorKind kind, const WeightVector& prior, std::span<const double> cum,
                                             double eta, Rng* rng = nullptr) {
  switch (kind) {
    case EstimatorKind::Bayes: return bayes_from_cumulative(prior, cum, eta);
    case EstimatorKind::TwoPart: return WeightVector::point_mass(prior.size(), two_part_from_cumulative(prior, cum, eta));
    case EstimatorKind::Erm: return WeightVector::point_mass(prior.size(), erm_from_cumulative(cum));
    default: {
      if (!rng) throw std::invalid_argument("random posterior needs a random stream");
      // Dirichlet draw restricted to the prior's support
      auto w = dirichlet_draw(*rng, prior.size());
      double s = 0.0;
      for (std::size_t f = 0; f < w.size(); ++f) s += (w[f] = prior[f] > 0.0 ? w[f] : 0.0);
      for (auto& x : w) x /= s;
      WeightVector out;
      out.weights = std::move(w);
      return out;
    }
  }
}

inline double kl_weights(const WeightVector& post, const WeightVector& prior) {
  double s = 0.0;
  for (std::size_t f = 0; f < post.size(); ++f) {
    if (post[f] == 0.0) continue;
    if (prior[f] == 0.0) return inf;
    s += post[f] * (std::log(post[f]) - std::log(prior[f]));
  }
  return std::max(s, 0.0);
}

struct InformationComplexity {
  double empirical_excess_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
  double eta = 0.0;
  std::size_t n = 0;
};

// IC from cumulative excess losses S_f = sum_i L_f(z_i) (comparator already subtracted).
inline InformationComplexity ic_from_cumulative(const WeightVector& prior, const WeightVector& post,
                                                std::span<const double> cum_excess, double eta, std::size_t n) {
  if (n == 0) throw std::invalid_argument("information complexity: n must be positive");
  if (!(eta > 0.0)) throw std::domain_error("information complexity: eta must be positive");
  InformationComplexity ic;
  ic.eta = eta;
  ic.n = n;
  double emp = 0.0;
  for (std::size_t f = 0; f < post.size(); ++f) {
    if (post[f] == 0.0) continue;
    if (cum_excess[f] == inf) {
      emp = inf;
      break;
    }
    emp += post[f] * cum_excess[f];
  }
  ic.empirical_excess_term = emp / static_cast<double>(n);
  ic.kl_term = kl_weights(post, prior) / (eta * static_cast<double>(n));
  ic.total = ic.empirical_excess_term + ic.kl_term;
  return ic;
}

inline std::vector<double> cumulative_excess(const FiniteProblem& pr, std::span<const std::size_t> sample,
                                             const Comparator& cmp) {
  auto cum = cumulative_loss(pr, sample);
  double c = sample_sum(cmp.loss(pr), sample);
  if (c == inf) throw std::domain_error("information complexity: comparator loss is +inf on the sample");
  for (auto& s : cum) s = s == inf ? inf : s - c;
  return cum;
}

inline InformationComplexity information_complexity(const FiniteProblem& pr, const WeightVector& prior,
                                                    const WeightVector& post, std::span<const std::size_t> sample,
                                                    double eta, const Comparator& cmp) {
  detail::check_prior(prior, pr.num_predictors());
  detail::check_prior(post, pr.num_predictors());
  return ic_from_cumulative(prior, post, cumulative_excess(pr, sample, cmp), eta, sample.size());
}

// Marginal-likelihood form of the Bayes IC: -(1/(eta n)) log E_prior exp(-eta S_f).
inline double bayes_ic_marginal(const WeightVector& prior, std::span<const double> cum_excess, double eta, std::size_t n) {
  std::vector<double> lw(prior.size());
  for (std::size_t f = 0; f < lw.size(); ++f)
    lw[f] = (prior[f] == 0.0 || cum_excess[f] == inf) ? -inf : std::log(prior[f]) - eta * cum_excess[f];
  double l = log_sum_exp(lw);
  if (l == -inf) return inf;
  return -l / (eta * static_cast<double>(n));
}

struct IcCheckOptions {
  std::size_t random_posteriors = 500;
  std::vector<double> eta_grid;  // defaults to 30 log-spaced points in [0.01, 10]
  std::size_t exhaustive_subset_max = 12;
  std::size_t random_subsets = 200;
  std::uint64_t seed = 1;
};

struct IcCheckReport {
  double marginal_gap = 0.0;         // |IC(Bayes) - marginal form|
  double random_posterior_margin = inf;  // min over candidates of IC(candidate) - IC(Bayes)
  double point_mass_margin = inf;
  double eta_monotone_margin = inf;  // min_k IC(eta_k) - IC(eta_{k+1})
  double chain_pre_margin = inf;     // restricted-posterior bound minus n IC
  double chain_b_margin = inf;       // restricted-prior bound minus restricted-posterior bound
  double twopart_margin = inf;       // min point-mass n IC minus n IC(Bayes)
  double twopart_equality_gap = 0.0;  // |n IC(two-part) - min_f code length|
  std::size_t subsets_checked = 0;
  double worst_margin = inf;
};

// Checks that the generalized Bayes posterior minimizes IC, that IC is monotone in eta,
// and the subset and two-part upper-bound chains. Returns the worst margin.
inline IcCheckReport ic_minimizer_check(const FiniteProblem& pr, const WeightVector& prior,
                                        std::span<const std::size_t> sample, double eta,
                                        const IcCheckOptions& opt = {}) {
  detail::check_prior(prior, pr.num_predictors());
  const std::size_t k = pr.num_predictors(), n = sample.size();
  const double nd = static_cast<double>(n);
  auto cum = cumulative_excess(pr, sample, Comparator::index(comparator_of(pr)));
  IcCheckReport rep;

  WeightVector bayes = bayes_from_cumulative(prior, cum, eta);
  double ic_b = ic_from_cumulative(prior, bayes, cum, eta, n).total;
  rep.marginal_gap = std::abs(ic_b - bayes_ic_marginal(prior, cum, eta, n));

  Rng rng = substream(opt.seed, 0);
  for (std::size_t t = 0; t < opt.random_posteriors; ++t) {
    WeightVector cand = estimate_from_cumulative(EstimatorKind::RandomPosterior, prior, cum, eta, &rng);
    rep.random_posterior_margin = std::min(rep.random_posterior_margin, ic_from_cumulative(prior, cand, cum, eta, n).total - ic_b);
  }
  double min_point = inf;
  for (std::size_t f = 0; f < k; ++f)
    if (prior[f] > 0.0)
      min_point = std::min(min_point, ic_from_cumulative(prior, WeightVector::point_mass(k, f), cum, eta, n).total);
  rep.point_mass_margin = min_point - ic_b;

  std::vector<double> grid = opt.eta_grid;
  if (grid.empty())
    for (int i = 0; i < 30; ++i) grid.push_back(0.01 * std::pow(1000.0, i / 29.0));
  std::sort(grid.begin(), grid.end());
  double prev = bayes_ic_marginal(prior, cum, grid[0], n);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double cur = bayes_ic_marginal(prior, cum, grid[i], n);
    rep.eta_monotone_margin = std::min(rep.eta_monotone_margin, prev - cur);
    prev = cur;
  }

  auto check_subset = [&](const std::vector<std::size_t>& members) {
    double mass = 0.0;
    for (std::size_t f : members) mass += prior[f];
    if (!(mass > 0.0)) return;
    std::vector<double> restricted(k, 0.0);
    for (std::size_t f : members) restricted[f] = prior[f] / mass;
    WeightVector rprior;
    rprior.weights = restricted;
    double head = -std::log(mass) / eta;
    double mid = head + nd * bayes_ic_marginal(rprior, cum, eta, n);
    double mean_loss = 0.0;
    bool infinite = false;
    for (std::size_t f : members) {
      if (restricted[f] == 0.0) continue;
      if (cum[f] == inf) infinite = true;
      else mean_loss += restricted[f] * cum[f];
    }
    double rhs = head + (infinite ? inf : mean_loss);
    rep.chain_pre_margin = std::min(rep.chain_pre_margin, mid - nd * ic_b);
    if (mid < inf) rep.chain_b_margin = std::min(rep.chain_b_margin, rhs - mid);
    ++rep.subsets_checked;
  };
  if (k <= opt.exhaustive_subset_max) {
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
      std::vector<std::size_t> members;
      for (std::size_t f = 0; f < k; ++f)
        if (mask >> f & 1) members.push_back(f);
      check_subset(members);
    }
  } else {
    Rng srng = substream(opt.seed, 1);
    for (std::size_t t = 0; t < opt.random_subsets; ++t) {
      std::vector<std::size_t> members;
      for (std::size_t f = 0; f < k; ++f)
        if (uniform01(srng) < 0.5) members.push_back(f);
      if (members.empty()) members.push_back(static_cast<std::size_t>(uniform01(srng) * static_cast<double>(k)));
      check_subset(members);
    }
  }

  // two-part chain: n IC(Bayes) <= min over point masses = n IC(two-part) = min code length
  std::size_t tp = two_part_from_cumulative(prior, cum, eta);
  double ic_tp = ic_from_cumulative(prior, WeightVector::point_mass(k, tp), cum, eta, n).total;
  double code = inf;
  for (std::size_t f = 0; f < k; ++f)
    if (prior[f] > 0.0) code = std::min(code, -std::log(prior[f]) / eta + cum[f]);
  rep.twopart_margin = nd * (min_point - ic_b);
  rep.twopart_equality_gap = std::max(std::abs(nd * ic_tp - code), std::abs(ic_tp - min_point) * nd);

  rep.worst_margin = std::min({rep.random_posterior_margin, rep.point_mass_margin, rep.eta_monotone_margin,
                               rep.chain_pre_margin, rep.chain_b_margin, rep.twopart_margin,
                               -rep.marginal_gap, -rep.twopart_equality_gap});
  return rep;
}

// Composite prior pi(f) = q(j) pi_j(f) over disjoint index blocks of a common F.
struct ModelBlock {
  std::size_t offset = 0;
  WeightVector prior;
};

inline WeightVector aggregate_priors(const std::vector<ModelBlock>& blocks, std::span<const double> q, std::size_t total) {
  if (blocks.size() != q.size()) throw std::invalid_argument("aggregate_priors: one model weight per block required");
  if (!is_distribution(q, 1e-12)) throw std::invalid_argument("aggregate_priors: model prior must be a distribution");
  std::vector<double> w(total, 0.0);
  std::vector<bool> used(total, false);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (!(q[j] > 0.0)) throw std::invalid_argument("aggregate_priors: model prior must be positive on listed models");
    const auto& b = blocks[j];
    if (b.offset + b.prior.size() > total) throw std::invalid_argument("aggregate_priors: block exceeds predictor range");
    for (std::size_t i = 0; i < b.prior.size(); ++i) {
      if (used[b.offset + i]) throw std::invalid_argument("aggregate_priors: overlapping index ranges");
      used[b.offset + i] = true;
      w[b.offset + i] = q[j] * b.prior[i];
    }
  }
  WeightVector out;
  out.weights = std::move(w);
  return out;
}

struct AggregationCheck {
  double overhead = 0.0;      // -log q(j*) / (n eta)
  double worst_margin = inf;  // min over samples of bound - n IC(composite)
  std::size_t samples = 0;
};

// Verifies n IC(composite) <= -(1/eta) log q(j*) + n IC(within block j*) on each sample.
inline AggregationCheck aggregation_check(const FiniteProblem& pr, const std::vector<ModelBlock>& blocks,
                                          std::span<const double> q, std::size_t j_star,
                                          const std::vector<Sample>& samples, double eta) {
  const std::size_t k = pr.num_predictors();
  WeightVector comp = aggregate_priors(blocks, q, k);
  std::vector<double> within(k, 0.0);
  for (std::size_t i = 0; i < blocks.at(j_star).prior.size(); ++i) within[blocks[j_star].offset + i] = blocks[j_star].prior[i];
  WeightVector wp;
  wp.weights = within;
  AggregationCheck rep;
  const Comparator cmp = Comparator::index(comparator_of(pr));
  for (const auto& s : samples) {
    if (s.empty()) throw std::invalid_argument("aggregation_check: empty sample");
    const double nd = static_cast<double>(s.size());
    auto cum = cumulative_excess(pr, s, cmp);
    rep.overhead = -std::log(q[j_star]) / (nd * eta);
    double lhs = nd * bayes_ic_marginal(comp, cum, eta, s.size());
    double rhs = -std::log(q[j_star]) / eta + nd * bayes_ic_marginal(wp, cum, eta, s.size());
    rep.worst_margin = std::min(rep.worst_margin, rhs - lhs);
    ++rep.samples;
  }
  return rep;
}

struct GgvReport {
  bool hypothesis_holds = false;
  double ball_mass = 0.0;      // prior mass of {f : E[L_f] <= eps^2}
  double required_mass = 0.0;  // exp(-n C eps^2)
  double expected_ic = 0.0;
  double bound = 0.0;          // eps^2 (1 + C/eta)
  double margin = 0.0;         // bound - expected_ic
  double tightness = 0.0;      // bound / expected_ic
  bool exact = true;
  double standard_error = 0.0;
};

// Expected IC of the generalized Bayes posterior against eps^2 (1 + C/eta) under the
// prior-mass hypothesis. Exact over Z^n when |Z|^n <= cap, otherwise Monte Carlo.
inline GgvReport ggv_prior_mass_bound(const FiniteProblem& pr, const WeightVector& prior, double eps, double C,
                                      double eta, std::size_t n, double cap = 1e6, std::size_t mc_reps = 100000,
                                      std::uint64_t seed = 1) {
  detail::check_prior(prior, pr.num_predictors());
  if (n == 0) throw std::invalid_argument("ggv: n must be positive");
  GgvReport rep;
  const std::size_t cmp = comparator_of(pr);
  for (std::size_t f = 0; f < pr.num_predictors(); ++f)
    if (excess_risk(pr, f, cmp) <= eps * eps) rep.ball_mass += prior[f];
  rep.required_mass = std::exp(-static_cast<double>(n) * C * eps * eps);
  rep.hypothesis_holds = rep.ball_mass >= rep.required_mass * (1.0 - 1e-12);
  rep.bound = eps * eps * (1.0 + C / eta);
  if (!rep.hypothesis_holds) return rep;

  if (product_states(pr.num_outcomes(), n) <= cap) {
    double acc = 0.0;
    enumerate_samples(pr.probs, pr.loss, n, [&](double p, std::span<const double> sums, std::span<const std::size_t>) {
      std::vector<double> cum(sums.begin(), sums.end());
      double c = sums[cmp];
      for (auto& s : cum) s = s == inf ? inf : s - c;
      acc += p * bayes_ic_marginal(prior, cum, eta, n);
    });
    rep.expected_ic = acc;
  } else {
    rep.exact = false;
    DiscreteSampler draw(pr.probs);
    auto st = mc_mean(mc_reps, seed, 1, [&](Rng& rng, std::size_t) {
      Sample s(n);
      for (auto& z : s) z = draw(rng);
      auto cum = cumulative_excess(pr, s, Comparator::index(cmp));
      return bayes_ic_marginal(prior, cum, eta, n);
    });
    rep.expected_ic = st.mean;
    rep.standard_error = st.standard_error();
  }
  rep.margin = rep.bound - rep.expected_ic;
  rep.tightness = rep.expected_ic > 0.0 ? rep.bound / rep.expected_ic : inf;
  return rep;
}

}  // namespace fastrates

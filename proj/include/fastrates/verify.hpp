#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastrates/conditions.hpp"
#include "fastrates/divergences.hpp"
#include "fastrates/enumerate.hpp"
#include "fastrates/esi.hpp"
#include "fastrates/estimators.hpp"
#include "fastrates/expfam.hpp"
#include "fastrates/grip.hpp"
#include "fastrates/mc.hpp"
#include "fastrates/numeric.hpp"
#include "fastrates/problem.hpp"

namespace fastrates {

enum class Verdict { Pass, Fail, Inconclusive, PreAsymptotic, PremiseFailed };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    case Verdict::PreAsymptotic: return "pre-asymptotic";
    default: return "premise-failed";
  }
}

struct VerifyOutcome {
  std::string inequality;
  double moment_or_frequency = 0.0;
  double threshold = 1.0;
  bool passed = false;
  Verdict verdict = Verdict::Fail;
  double standard_error = 0.0;  // zero for exact outcomes
  double replicates_or_states = 0.0;
  bool exact = true;
  std::map<std::string, double> details;
  std::vector<std::string> notes;
};

struct EnumerationPlan {
  FiniteProblem problem;
  std::size_t n = 1;
  EstimatorKind estimator = EstimatorKind::Bayes;
  std::optional<WeightVector> prior;  // uniform when absent
  double eta = 0.5;
  double cap = 1e6;
  bool mc_fallback = true;
  std::size_t replicates = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double tol = 1e-10;

  WeightVector prior_or_uniform() const { return prior ? *prior : WeightVector::uniform(problem.num_predictors()); }
  bool exact() const { return product_states(problem.num_outcomes(), n) <= cap; }
};

// Exact: pass iff value <= threshold + tol. Monte Carlo: fail above threshold + 3 SE,
// inconclusive within 3 SE of the threshold, pass below it.
inline void settle(VerifyOutcome& o, double tol) {
  if (o.exact) {
    o.passed = o.moment_or_frequency <= o.threshold + tol;
    o.verdict = o.passed ? Verdict::Pass : Verdict::Fail;
    return;
  }
  const double band = 3.0 * o.standard_error;
  o.passed = o.moment_or_frequency <= o.threshold + band;
  if (!o.passed)
    o.verdict = Verdict::Fail;
  else if (o.moment_or_frequency > o.threshold - band)
    o.verdict = Verdict::Inconclusive;
  else
    o.verdict = Verdict::Pass;
}

namespace detail {

struct SampleView {
  std::span<const double> cum_loss;    // sum_i loss_f(z_i) for every f
  std::span<const double> cum_excess;  // sum_i (loss_f - comparator_f)(z_i)
  std::span<const std::size_t> sample;
  Rng* rng = nullptr;
};

template <std::size_t D>
struct Averages {
  std::array<double, D> mean{};
  std::array<double, D> se{};
  bool exact = true;
  double count = 0.0;
};

// Averages of a D-valued statistic of z^n under P^n: exactly over Z^n when
// |Z|^n <= cap, otherwise over seeded Monte Carlo replicates.
template <std::size_t D, class Stat>
Averages<D> sample_average(const EnumerationPlan& plan, const Matrix& excess_rows, Stat&& stat) {
  const FiniteProblem& pr = plan.problem;
  const std::size_t k = pr.num_predictors();
  if (excess_rows.rows() != k || excess_rows.cols() != pr.num_outcomes())
    throw std::invalid_argument("sample_average: excess rows do not match the problem");
  if (plan.n == 0) throw std::invalid_argument("sample_average: n must be positive");
  Averages<D> out;
  if (plan.exact()) {
    Matrix rows(2 * k, pr.num_outcomes());
    for (std::size_t f = 0; f < k; ++f)
      for (std::size_t z = 0; z < pr.num_outcomes(); ++z) {
        rows(f, z) = pr.loss(f, z);
        rows(k + f, z) = excess_rows(f, z);
      }
    std::uint64_t state = 0;
    // only randomized estimators consume a stream; seeding one per state is not free
    const bool randomized = plan.estimator == EstimatorKind::RandomPosterior;
    Rng rng;
    enumerate_samples(pr.probs, rows, plan.n, [&](double p, std::span<const double> sums, std::span<const std::size_t> s) {
      if (randomized) rng = substream(plan.seed, state);
      ++state;
      SampleView v{sums.subspan(0, k), sums.subspan(k, k), s, randomized ? &rng : nullptr};
      std::array<double, D> x = stat(v);
      for (std::size_t d = 0; d < D; ++d)
        if (p > 0.0) out.mean[d] += p * x[d];
    });
    out.count = static_cast<double>(state);
    return out;
  }
  if (!plan.mc_fallback) throw std::length_error("sample_average: |Z|^n exceeds the enumeration cap");
  out.exact = false;
  DiscreteSampler draw(pr.probs);
  auto xs = mc_map<std::array<double, D>>(plan.replicates, plan.seed, plan.threads, [&](Rng& rng, std::size_t) {
    Sample s(plan.n);
    for (auto& z : s) z = draw(rng);
    std::vector<double> cl(k, 0.0), ce(k, 0.0);
    for (std::size_t f = 0; f < k; ++f)
      for (std::size_t z : s) {
        cl[f] += pr.loss(f, z);
        ce[f] += excess_rows(f, z);
      }
    SampleView v{cl, ce, s, &rng};
    return stat(v);
  });
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> col(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) col[i] = xs[i][d];
    RunningStats st = summarize(col);
    out.mean[d] = st.mean;
    out.se[d] = st.standard_error();
  }
  out.count = static_cast<double>(plan.replicates);
  return out;
}

inline Matrix static_excess_rows(const FiniteProblem& pr, std::size_t cmp) {
  Matrix r(pr.num_predictors(), pr.num_outcomes());
  for (std::size_t f = 0; f < r.rows(); ++f) {
    auto L = excess_loss(pr, f, Comparator::index(cmp));
    for (std::size_t z = 0; z < r.cols(); ++z) r(f, z) = L[z];
  }
  return r;
}

inline double posterior_mean(const WeightVector& post, std::span<const double> values) {
  double s = 0.0;
  for (std::size_t f = 0; f < post.size(); ++f) {
    if (post[f] == 0.0) continue;
    if (values[f] == inf) return inf;
    s += post[f] * values[f];
  }
  return s;
}

// ESI moment E[exp(rate (lhs - rhs))] with exceedance frequencies at K = log(1/delta).
inline const std::array<double, 3>& drop_deltas() {
  static const std::array<double, 3> d{0.5, 0.1, 0.02};
  return d;
}

template <class Sides>
VerifyOutcome esi_outcome(const EnumerationPlan& plan, const Matrix& excess_rows, double rate, const std::string& name,
                          Sides&& sides) {
  const WeightVector prior = plan.prior_or_uniform();
  auto avg = sample_average<4>(plan, excess_rows, [&](const SampleView& v) {
    WeightVector post = estimate_from_cumulative(plan.estimator, prior, v.cum_loss, plan.eta, v.rng);
    InformationComplexity ic = ic_from_cumulative(prior, post, v.cum_excess, plan.eta, plan.n);
    auto [lhs, rhs] = sides(post, ic);
    double x = (rhs == inf) ? -inf : rate * (lhs - rhs);
    std::array<double, 4> r{std::exp(x), 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 3; ++i) r[i + 1] = x >= std::log(1.0 / drop_deltas()[i]) ? 1.0 : 0.0;
    return r;
  });
  VerifyOutcome o;
  o.inequality = name;
  o.moment_or_frequency = avg.mean[0];
  o.standard_error = avg.se[0];
  o.exact = avg.exact;
  o.replicates_or_states = avg.count;
  o.threshold = 1.0;
  o.details["rate"] = rate;
  for (std::size_t i = 0; i < 3; ++i) {
    double d = drop_deltas()[i];
    o.details["exceed_" + std::to_string(d).substr(0, 4)] = avg.mean[i + 1];
  }
  settle(o, plan.tol);
  return o;
}

inline std::vector<double> excess_risks(const FiniteProblem& pr, std::size_t cmp) {
  std::vector<double> r(pr.num_predictors());
  for (std::size_t f = 0; f < r.size(); ++f) r[f] = excess_risk(pr, f, cmp);
  return r;
}

}  // namespace detail

// Row f holds the loss of the mini-GRIP of {comparator, f}.
inline Matrix mini_grip_comparator_rows(const FiniteProblem& pr, double eta) {
  Matrix rows(pr.num_predictors(), pr.num_outcomes());
  const std::size_t cmp = comparator_of(pr);
  for (std::size_t f = 0; f < rows.rows(); ++f) {
    auto g = compute_mini_grip(pr, f, eta, 1e-13, cmp).grip_loss;
    for (std::size_t z = 0; z < rows.cols(); ++z) rows(f, z) = g[z];
  }
  return rows;
}

// E_{f~posterior}[E^ann(eta)[loss_f - phi_f]] against IC_{n,eta}(phi || estimator) at rate
// eta n. phi_f is the comparator row for f: the risk minimizer unless rows are supplied.
inline VerifyOutcome verify_zhang(const EnumerationPlan& plan, const std::optional<Matrix>& comparator_rows = std::nullopt) {
  const FiniteProblem& pr = plan.problem;
  if (!(plan.eta > 0.0)) throw std::domain_error("verify_zhang: eta must be positive");
  Matrix rows;
  if (comparator_rows) {
    if (comparator_rows->rows() != pr.num_predictors() || comparator_rows->cols() != pr.num_outcomes())
      throw std::invalid_argument("verify_zhang: comparator rows do not match the problem");
    rows = Matrix(pr.num_predictors(), pr.num_outcomes());
    for (std::size_t f = 0; f < rows.rows(); ++f)
      for (std::size_t z = 0; z < rows.cols(); ++z) {
        double a = pr.loss(f, z), b = (*comparator_rows)(f, z);
        if (b == inf) throw std::domain_error("verify_zhang: comparator loss is +inf");
        rows(f, z) = a == inf ? inf : a - b;
      }
  } else {
    rows = detail::static_excess_rows(pr, comparator_of(pr));
  }
  std::vector<double> ann(pr.num_predictors());
  for (std::size_t f = 0; f < ann.size(); ++f) ann[f] = annealed_expectation(pr.probs, rows.row(f), plan.eta);
  const double rate = plan.eta * static_cast<double>(plan.n);
  auto o = detail::esi_outcome(plan, rows, rate, comparator_rows ? "zhang-comparator-map" : "zhang",
                               [&](const WeightVector& post, const InformationComplexity& ic) {
                                 return std::pair{detail::posterior_mean(post, ann), ic.total};
                               });
  o.details["eta"] = plan.eta;
  o.details["n"] = static_cast<double>(plan.n);
  return o;
}

enum class MetricForm { Corrected, Literal };

// Posterior-mean squared misspecification metric against K IC at rate eta n / K.
// C_eta = eta/(eta_bar - eta). Literal: K = C_eta at rate eta n, which only holds at
// eta = eta_bar/2 in general. Corrected: K = max(1, C_eta); the pointwise step
// d^2 <= K E^ann_eta[L_f] needs K >= 1 below eta_bar/2, and scaling an ESI by K > 1
// divides its rate by K.
inline VerifyOutcome verify_metric_theorem(const EnumerationPlan& plan, double eta_bar, MetricForm form = MetricForm::Corrected) {
  const FiniteProblem& pr = plan.problem;
  if (!(plan.eta > 0.0) || !(plan.eta < eta_bar)) throw std::domain_error("verify_metric_theorem: need 0 < eta < eta_bar");
  if (!check_strong_central(pr, eta_bar).holds) throw std::domain_error("verify_metric_theorem: central condition not certified");
  const std::size_t cmp = comparator_of(pr);
  std::vector<double> d2(pr.num_predictors());
  for (std::size_t f = 0; f < d2.size(); ++f) d2[f] = misspec_metric(pr, cmp, f, eta_bar);
  const double C = plan.eta / (eta_bar - plan.eta);
  const double K = form == MetricForm::Literal ? C : std::max(1.0, C);
  const double rate = plan.eta * static_cast<double>(plan.n) / (form == MetricForm::Literal ? 1.0 : K);
  auto o = detail::esi_outcome(plan, detail::static_excess_rows(pr, cmp), rate,
                               form == MetricForm::Literal ? "metric-literal" : "metric",
                               [&](const WeightVector& post, const InformationComplexity& ic) {
                                 return std::pair{detail::posterior_mean(post, d2), K * ic.total};
                               });
  o.details["C_eta"] = C;
  o.details["constant"] = K;
  o.details["eta_bar"] = eta_bar;
  return o;
}

// Posterior-mean excess risk against c_u IC at rate eta n / c_u.
inline VerifyOutcome verify_first_risk_bound(const EnumerationPlan& plan, double eta_bar, double u, double c) {
  const FiniteProblem& pr = plan.problem;
  if (!check_strong_central(pr, eta_bar).holds) throw std::domain_error("verify_first_risk_bound: central condition not certified");
  if (!check_witness(pr, u, c).holds) throw std::domain_error("verify_first_risk_bound: witness condition not certified");
  const double cu = cu_constant(plan.eta, eta_bar, u, c);
  const std::size_t cmp = comparator_of(pr);
  auto risks = detail::excess_risks(pr, cmp);
  auto o = detail::esi_outcome(plan, detail::static_excess_rows(pr, cmp), plan.eta * static_cast<double>(plan.n) / cu,
                               "first-risk-bound", [&](const WeightVector& post, const InformationComplexity& ic) {
                                 return std::pair{detail::posterior_mean(post, risks), cu * ic.total};
                               });
  o.details["c_u"] = cu;
  return o;
}

// tau form: posterior-mean excess risk against lambda + c_{tau(lambda)} IC.
inline VerifyOutcome verify_first_risk_bound_tau(const EnumerationPlan& plan, double eta_bar, const TauFunction& tau, double c,
                                                 double lambda) {
  const FiniteProblem& pr = plan.problem;
  if (!(lambda > 0.0)) throw std::domain_error("verify_first_risk_bound_tau: lambda must be positive");
  if (!check_strong_central(pr, eta_bar).holds) throw std::domain_error("verify_first_risk_bound_tau: central condition not certified");
  if (!check_tau_witness(pr, tau, c).holds) throw std::domain_error("verify_first_risk_bound_tau: witness condition not certified");
  const double ct = cu_constant(plan.eta, eta_bar, tau(lambda), c);
  const std::size_t cmp = comparator_of(pr);
  auto risks = detail::excess_risks(pr, cmp);
  auto o = detail::esi_outcome(plan, detail::static_excess_rows(pr, cmp), plan.eta * static_cast<double>(plan.n) / ct,
                               "first-risk-bound-tau", [&](const WeightVector& post, const InformationComplexity& ic) {
                                 return std::pair{detail::posterior_mean(post, risks), lambda + ct * ic.total};
                               });
  o.details["c_tau"] = ct;
  o.details["lambda"] = lambda;
  return o;
}

enum class Branch { Central, Ppc };

struct MainBoundedSpec {
  double v_eps = 1.0;  // v(eps)
  double eps = 0.0;
  double u = 1.0;
  double c = 1.0;
  Branch branch = Branch::Central;
};

// (1/c)(2 eta u + 1)/(1 - 2 eta/v)
inline double c_prime_2u(double eta, double v, double u, double c) {
  if (!(eta > 0.0) || !(2.0 * eta < v)) throw std::domain_error("c_prime_2u: need 0 < eta < v(eps)/2");
  return (2.0 * eta * u + 1.0) / (c * (1.0 - 2.0 * eta / v));
}

inline VerifyOutcome verify_main_bounded(const EnumerationPlan& plan, const MainBoundedSpec& s) {
  const FiniteProblem& pr = plan.problem;
  if (!(2.0 * plan.eta < s.v_eps)) throw std::domain_error("verify_main_bounded: eta must be below v(eps)/2");
  if (!check_witness(pr, s.u, s.c).holds) throw std::domain_error("verify_main_bounded: witness condition not certified");
  const double cp = c_prime_2u(plan.eta, s.v_eps, s.u, s.c);
  const std::size_t cmp = comparator_of(pr);
  const std::vector<double> eps_grid{s.eps};
  const VFunction v = VFunction::constant(s.v_eps);
  auto premise = s.branch == Branch::Central ? check_v_central(pr, v, eps_grid) : check_v_ppc(pr, v, eps_grid);
  VerifyOutcome o;
  if (!premise.holds) {
    o.inequality = s.branch == Branch::Central ? "main-bounded-central" : "main-bounded-ppc";
    o.verdict = Verdict::PremiseFailed;
    o.details["premise_margin"] = premise.margin;
    o.notes.push_back("premise fails at this epsilon; no bound is asserted");
    return o;
  }
  auto risks = detail::excess_risks(pr, cmp);
  Matrix rows = detail::static_excess_rows(pr, cmp);
  if (s.branch == Branch::Central) {
    // eps = 0 is the strong central case, where the rate improves by a factor 2
    const double rate = plan.eta * static_cast<double>(plan.n) / (s.eps == 0.0 ? cp : 2.0 * cp);
    o = detail::esi_outcome(plan, rows, rate, "main-bounded-central", [&](const WeightVector& post, const InformationComplexity& ic) {
      return std::pair{detail::posterior_mean(post, risks), cp * (ic.total + s.eps)};
    });
  } else {
    const WeightVector prior = plan.prior_or_uniform();
    auto avg = detail::sample_average<2>(plan, rows, [&](const detail::SampleView& v) {
      WeightVector post = estimate_from_cumulative(plan.estimator, prior, v.cum_loss, plan.eta, v.rng);
      InformationComplexity ic = ic_from_cumulative(prior, post, v.cum_excess, plan.eta, plan.n);
      return std::array<double, 2>{detail::posterior_mean(post, risks), ic.total};
    });
    o.inequality = "main-bounded-ppc";
    o.exact = avg.exact;
    o.replicates_or_states = avg.count;
    o.moment_or_frequency = avg.mean[0];
    o.standard_error = std::hypot(avg.se[0], cp * avg.se[1]);
    o.threshold = cp * (avg.mean[1] + s.eps);
    o.details["expected_ic"] = avg.mean[1];
    settle(o, plan.tol);
  }
  o.details["c_prime"] = cp;
  o.details["eps"] = s.eps;
  o.details["v_eps"] = s.v_eps;
  return o;
}

// Largest eta (up to cap) with E[exp(-eta L_f)] <= exp(eta eps) for every f.
inline double v_central_level(const FiniteProblem& pr, double eps, double cap = 1e3, double rel_tol = 1e-10) {
  const std::vector<double> grid{eps};
  auto ok = [&](double eta) { return check_v_central(pr, VFunction::constant(eta), grid, 0.0).holds; };
  if (ok(cap)) return cap;
  return bisect_last_true(ok, 0.0, cap, rel_tol);
}

// ---- unbounded excess risk, deterministic estimators ----

struct UnboundedPlan {
  FiniteProblem problem;
  EstimatorKind estimator = EstimatorKind::Erm;  // must be deterministic
  std::optional<WeightVector> prior;
  std::size_t n = 512;
  double eta = 0.1;
  double eps = 0.0;
  double v_eps = 1.0;
  double u = 1.0;  // tau(x) = u max(1, x)
  double c = 0.5;
  std::vector<double> deltas{0.25, 0.1};
  std::size_t replicates = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// (u/c)(2 eta + 1)/(1 - 2 eta/v)
inline double c_prime_2(double eta, double v, double u, double c) {
  if (!(eta > 0.0) || !(2.0 * eta < v)) throw std::domain_error("c_prime_2: need 0 < eta < v(eps)/2");
  return u * (2.0 * eta + 1.0) / (c * (1.0 - 2.0 * eta / v));
}

// One outcome per delta: frequency of E[L_fhat] > (c'_2/delta) BOUND over replicates,
// with BOUND = E[IC] + eps. A BOUND factor of 1 or more is reported as pre-asymptotic.
inline std::vector<VerifyOutcome> verify_main_unbounded(const UnboundedPlan& plan) {
  const FiniteProblem& pr = plan.problem;
  if (plan.estimator == EstimatorKind::Bayes || plan.estimator == EstimatorKind::RandomPosterior)
    throw std::invalid_argument("verify_main_unbounded: estimator must be deterministic");
  if (!(2.0 * plan.eta < plan.v_eps)) throw std::domain_error("verify_main_unbounded: eta must be below v(eps)/2");
  if (!(plan.u >= 1.0)) throw std::domain_error("verify_main_unbounded: u must be >= 1");
  if (!check_tau_witness(pr, TauFunction::linear(plan.u), plan.c).holds)
    throw std::domain_error("verify_main_unbounded: tau witness not certified");
  const std::vector<double> eps_grid{plan.eps};
  auto premise = check_v_ppc(pr, VFunction::constant(plan.v_eps), eps_grid);
  const double c2 = c_prime_2(plan.eta, plan.v_eps, plan.u, plan.c);
  std::vector<VerifyOutcome> out;
  if (!premise.holds) {
    VerifyOutcome o;
    o.inequality = "main-unbounded";
    o.verdict = Verdict::PremiseFailed;
    o.details["premise_margin"] = premise.margin;
    out.push_back(o);
    return out;
  }
  const std::size_t cmp = comparator_of(pr);
  const auto risks = detail::excess_risks(pr, cmp);
  const WeightVector prior = plan.prior ? *plan.prior : WeightVector::uniform(pr.num_predictors());
  DiscreteSampler draw(pr.probs);
  const std::size_t k = pr.num_predictors();
  auto reps = mc_map<std::array<double, 2>>(plan.replicates, plan.seed, plan.threads, [&](Rng& rng, std::size_t) {
    std::vector<double> cum(k, 0.0);
    for (std::size_t i = 0; i < plan.n; ++i) {
      std::size_t z = draw(rng);
      for (std::size_t f = 0; f < k; ++f) cum[f] += pr.loss(f, z);
    }
    std::size_t fhat = plan.estimator == EstimatorKind::Erm ? erm_from_cumulative(cum)
                                                             : two_part_from_cumulative(prior, cum, plan.eta);
    double emp = (cum[fhat] - cum[cmp]) / static_cast<double>(plan.n);
    double ic = emp - std::log(prior[fhat]) / (plan.eta * static_cast<double>(plan.n));
    return std::array<double, 2>{ic, risks[fhat]};
  });
  std::vector<double> ics(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) ics[i] = reps[i][0];
  RunningStats ic_stats = summarize(ics);
  const double bound = ic_stats.mean + plan.eps;
  for (double delta : plan.deltas) {
    VerifyOutcome o;
    o.inequality = "main-unbounded";
    o.exact = false;
    o.replicates_or_states = static_cast<double>(plan.replicates);
    o.threshold = delta;
    const double r = c2 / delta * bound;
    o.details["delta"] = delta;
    o.details["expected_ic"] = ic_stats.mean;
    o.details["expected_ic_se"] = ic_stats.standard_error();
    o.details["c_prime_2"] = c2;
    o.details["risk_bound"] = r;
    if (!(r < 1.0)) {
      o.verdict = Verdict::PreAsymptotic;
      o.notes.push_back("bound factor is not below 1 at this n");
      out.push_back(o);
      continue;
    }
    double viol = 0.0;
    for (const auto& x : reps) viol += x[1] > r ? 1.0 : 0.0;
    o.moment_or_frequency = viol / static_cast<double>(plan.replicates);
    o.standard_error = std::sqrt(delta * (1.0 - delta) / static_cast<double>(plan.replicates));
    settle(o, 0.0);
    out.push_back(o);
  }
  return out;
}

// ---- unbounded excess risk, generalized Bayes: mass of the bad set along n ----

struct MassTrendPoint {
  std::size_t n = 0;
  double eta = 0.0;
  double bound = 0.0;     // a_n E[IC] + eps
  double bad_mass = 0.0;  // mean posterior mass of {f : E[L_f] > c'_2 bound}
  double bad_mass_se = 0.0;
};

struct MassTrend {
  std::vector<MassTrendPoint> points;
  double slope = 0.0;  // OLS slope of bad mass against log n
  bool decreasing = false;
};

inline MassTrend posterior_mass_trend(const FiniteProblem& pr, const WeightVector& prior, std::span<const std::size_t> ns,
                                      const std::function<double(std::size_t)>& eta_of_n, double eps, double v_eps, double u,
                                      double c, std::size_t reps, std::uint64_t seed, unsigned threads = 1) {
  if (ns.size() < 2) throw std::invalid_argument("posterior_mass_trend: need at least two sample sizes");
  const std::size_t cmp = comparator_of(pr);
  const auto risks = detail::excess_risks(pr, cmp);
  const std::size_t k = pr.num_predictors();
  DiscreteSampler draw(pr.probs);
  MassTrend t;
  std::vector<double> xs, ys;
  for (std::size_t idx = 0; idx < ns.size(); ++idx) {
    const std::size_t n = ns[idx];
    const double eta = eta_of_n(n);
    const double c2 = c_prime_2(eta, v_eps, u, c);
    auto rows = mc_map<std::vector<double>>(reps, seed + idx, threads, [&](Rng& rng, std::size_t) {
      std::vector<double> cum(k, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t z = draw(rng);
        for (std::size_t f = 0; f < k; ++f) cum[f] += pr.loss(f, z);
      }
      WeightVector post = bayes_from_cumulative(prior, cum, eta);
      std::vector<double> ce(k);
      for (std::size_t f = 0; f < k; ++f) ce[f] = cum[f] - cum[cmp];
      std::vector<double> r = post.weights;
      r.push_back(ic_from_cumulative(prior, post, ce, eta, n).total);
      return r;
    });
    std::vector<double> ic(reps);
    for (std::size_t i = 0; i < reps; ++i) ic[i] = rows[i][k];
    MassTrendPoint p;
    p.n = n;
    p.eta = eta;
    // a_n = log n inflates the information complexity
    p.bound = std::log(static_cast<double>(n)) * summarize(ic).mean + eps;
    std::vector<double> mass(reps, 0.0);
    for (std::size_t i = 0; i < reps; ++i)
      for (std::size_t f = 0; f < k; ++f)
        if (risks[f] > c2 * p.bound) mass[i] += rows[i][f];
    auto st = summarize(mass);
    p.bad_mass = st.mean;
    p.bad_mass_se = st.standard_error();
    t.points.push_back(p);
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(p.bad_mass);
  }
  t.slope = std::get<0>(ols_fit(xs, ys));
  t.decreasing = t.slope <= 0.0 && t.points.back().bad_mass <= t.points.front().bad_mass;
  return t;
}

// ---- rate fits ----

struct RateFit {
  std::vector<double> ns;
  std::vector<double> values;
  double exponent = 0.0;  // value ~ n^{-exponent}
  double intercept = 0.0;
};

inline RateFit rate_fit(std::span<const double> ns, std::span<const double> values) {
  if (ns.size() != values.size() || ns.size() < 5) throw std::invalid_argument("rate_fit: need at least 5 matching points");
  std::vector<double> lx(ns.size()), ly(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0) || !(values[i] > 0.0)) throw std::domain_error("rate_fit: points must be positive");
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(values[i]);
  }
  auto [slope, icpt] = ols_fit(lx, ly);
  return {std::vector<double>(ns.begin(), ns.end()), std::vector<double>(values.begin(), values.end()), -slope, icpt};
}

// Expected excess risk of ERM over constant predictors {k h} under squared loss with a
// N(0, sigma^2) response: ERM rounds the sample mean to the grid.
inline double gaussian_erm_excess(double sigma, double h, std::size_t n) {
  if (!(sigma > 0.0) || !(h > 0.0) || n == 0) throw std::domain_error("gaussian_erm_excess: invalid arguments");
  const double s = sigma / std::sqrt(static_cast<double>(n));
  auto cdf = [&](double x) { return 0.5 * std::erfc(-x / (s * std::numbers::sqrt2)); };
  const long kmax = static_cast<long>(std::ceil(12.0 * s / h)) + 1;
  double acc = 0.0;
  for (long k = 1; k <= kmax; ++k) {
    double lo = (static_cast<double>(k) - 0.5) * h, hi = (static_cast<double>(k) + 0.5) * h;
    double mass = cdf(hi) - cdf(lo);  // the same mass sits at -k by symmetry
    acc += 2.0 * mass * (static_cast<double>(k) * h) * (static_cast<double>(k) * h);
  }
  return acc;
}

}  // namespace fastrates

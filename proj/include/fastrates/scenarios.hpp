#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "fastrates/catalog.hpp"
#include "fastrates/conditions.hpp"
#include "fastrates/divergences.hpp"
#include "fastrates/estimators.hpp"
#include "fastrates/expfam.hpp"
#include "fastrates/grip.hpp"
#include "fastrates/io.hpp"
#include "fastrates/verify.hpp"

namespace fastrates {

struct RunContext {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  json params = json::object();  // scenario parameters such as sigma_ratio
};

// Results plus the aggregate verdict: fail beats inconclusive beats pass.
class Report {
 public:
  void add(const std::string& name, Verdict v, json payload) {
    payload["name"] = name;
    payload["verdict"] = to_string(v);
    results_.push_back(std::move(payload));
    if (v == Verdict::Fail) ++fail_;
    else if (v == Verdict::Pass) ++pass_;
    else ++other_;
  }
  void expect(const std::string& name, bool expected, bool observed, json payload) {
    payload["expected"] = expected;
    payload["observed"] = observed;
    add(name, expected == observed ? Verdict::Pass : Verdict::Fail, std::move(payload));
  }
  Verdict verdict() const {
    if (fail_) return Verdict::Fail;
    if (other_) return Verdict::Inconclusive;
    return Verdict::Pass;
  }
  json summary() const {
    return json{{"pass", pass_}, {"fail", fail_}, {"inconclusive", other_}, {"verdict", to_string(verdict())}};
  }
  const json& results() const { return results_; }
  json document(const std::string& scenario, const json& config) const {
    return json{{"tool", "fastrates"}, {"version", tool_version}, {"scenario", scenario},
                {"config", config},     {"results", results_},    {"summary", summary()}};
  }

 private:
  json results_ = json::array();
  int pass_ = 0, fail_ = 0, other_ = 0;
};

inline int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    default: return 2;
  }
}

// ---- parsing of parameter objects ----

inline VFunction vfunction_from_json(const json& j) {
  if (j.is_number()) return VFunction::constant(j.get<double>());
  reject_unknown_keys(j, {"kind", "eta_bar", "coeff", "exponent", "vmax", "table"}, "v");
  const std::string kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") return VFunction::constant(real_at(j, "eta_bar"));
  if (kind == "power") return VFunction::power(real_at(j, "coeff"), real_at(j, "exponent"), real_or(j, "vmax", 1e3));
  if (kind == "tabulated") return VFunction::tabulated(get_or<std::vector<std::pair<double, double>>>(j, "table", {}));
  throw ConfigError("v: unknown kind \"" + kind + "\"");
}

inline TauFunction tau_from_json(const json& j) {
  if (j.is_number()) return TauFunction::constant(j.get<double>());
  reject_unknown_keys(j, {"kind", "u", "exponent", "kappa", "M", "table"}, "tau");
  const std::string kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") return TauFunction::constant(real_at(j, "u"));
  if (kind == "power") return TauFunction::power(real_at(j, "u"), real_at(j, "exponent"));
  if (kind == "log_shape") return TauFunction::log_shape(real_at(j, "kappa"), real_at(j, "M"));
  if (kind == "linear") return TauFunction::linear(real_at(j, "u"), real_or(j, "M", 1.0));
  if (kind == "tabulated") return TauFunction::tabulated(get_or<std::vector<std::pair<double, double>>>(j, "table", {}));
  throw ConfigError("tau: unknown kind \"" + kind + "\"");
}

inline std::optional<WeightVector> prior_from_json(const json& j, const char* key, std::size_t k) {
  if (!j.contains(key)) return std::nullopt;
  auto w = reals_from_json(j.at(key));
  if (w.size() != k) throw ConfigError(std::string(key) + ": length differs from the number of predictors");
  try {
    return WeightVector(std::move(w), 1e-9);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

inline EstimatorKind estimator_from_json(const json& j) {
  const std::string s = get_or<std::string>(j, "estimator", "bayes");
  try {
    return estimator_from_string(s);
  } catch (const std::exception&) {
    throw ConfigError("unknown estimator \"" + s + "\"");
  }
}

inline FiniteProblem problem_from_spec(const json& j) {
  if (j.is_string()) return load_problem(j.get<std::string>());
  return problem_from_json(j);
}

// ---- single operations on a problem ----

inline json run_check(const FiniteProblem& pr, const std::string& condition, const json& p) {
  auto eps_grid = [&]() { return p.contains("eps_grid") ? reals_from_json(p.at("eps_grid")) : std::vector<double>{0.0}; };
  const double tol = real_or(p, "tol", 1e-9);
  ConditionReport r;
  if (condition == "strong_central") {
    reject_unknown_keys(p, {"eta_bar", "tol"}, condition);
    r = check_strong_central(pr, real_at(p, "eta_bar"), tol);
  } else if (condition == "max_central_eta") {
    reject_unknown_keys(p, {"cap", "tol"}, condition);
    double e = max_central_eta(pr, 1e-10, real_or(p, "cap", 1e6), tol);
    r = check_strong_central(pr, e, tol);
    r.constants["eta_bar"] = e;
  } else if (condition == "v_central") {
    reject_unknown_keys(p, {"v", "eps_grid", "tol", "search_comparator"}, condition);
    r = check_v_central(pr, vfunction_from_json(p.at("v")), eps_grid(), tol, get_or<bool>(p, "search_comparator", false));
  } else if (condition == "v_ppc") {
    reject_unknown_keys(p, {"v", "eps_grid", "grip_tol"}, condition);
    GripOptions opt;
    opt.tol = real_or(p, "grip_tol", opt.tol);
    r = check_v_ppc(pr, vfunction_from_json(p.at("v")), eps_grid(), opt);
  } else if (condition == "witness") {
    reject_unknown_keys(p, {"u", "c", "tol"}, condition);
    r = check_witness(pr, real_at(p, "u"), real_at(p, "c"), tol);
  } else if (condition == "tau_witness") {
    reject_unknown_keys(p, {"tau", "c", "tol"}, condition);
    r = check_tau_witness(pr, tau_from_json(p.at("tau")), real_at(p, "c"), tol);
  } else if (condition == "bernstein") {
    reject_unknown_keys(p, {"beta", "B", "tol"}, condition);
    r = check_bernstein(pr, real_at(p, "beta"), real_at(p, "B"), tol);
  } else if (condition == "uniform_exp_tail") {
    reject_unknown_keys(p, {"kappa"}, condition);
    auto u = check_uniform_exp_tail(pr, real_at(p, "kappa"));
    return json{{"condition", "uniform_exp_tail"}, {"holds", u.holds}, {"log_M", real_to_json(u.log_M)}, {"M_kappa", real_to_json(u.M_kappa)}, {"kappa", u.kappa}};
  } else {
    throw ConfigError("unknown condition \"" + condition + "\"");
  }
  return to_json(r);
}

inline json run_grip(const FiniteProblem& pr, const json& p) {
  reject_unknown_keys(p, {"eta", "tol", "max_iter", "mini"}, "grip");
  const double eta = real_at(p, "eta");
  if (p.contains("mini")) {
    auto m = compute_mini_grip(pr, p.at("mini").get<std::size_t>(), eta);
    return json{{"eta", eta}, {"alpha", m.alpha}, {"grip_loss", reals_to_json(m.grip_loss)}, {"objective", real_to_json(m.objective)}};
  }
  GripOptions opt;
  opt.tol = real_or(p, "tol", opt.tol);
  opt.max_iter = get_or<std::size_t>(p, "max_iter", opt.max_iter);
  GripResult g = cached_grip(pr, eta, opt);
  json j = to_json(g);
  auto c = verify_grip_central(pr, g);
  j["central_max_moment"] = real_to_json(c.max_moment);
  j["central_holds"] = c.holds;
  return j;
}

inline json run_divergence(const FiniteProblem& pr, const std::string& kind, const json& p) {
  reject_unknown_keys(p, {"f", "g", "alpha", "eta", "eta_bar"}, "divergence");
  const std::size_t f = get_or<std::size_t>(p, "f", 0);
  auto density = [&](std::size_t i) {
    std::vector<double> q(pr.num_outcomes());
    for (std::size_t z = 0; z < q.size(); ++z) q[z] = std::exp(-pr.loss(i, z));
    return q;
  };
  double v = 0.0;
  if (kind == "kl") v = kl_divergence(pr.probs, density(f));
  else if (kind == "renyi") v = renyi_divergence(pr.probs, density(f), real_at(p, "alpha"));
  else if (kind == "hellinger") v = generalized_hellinger(pr.probs, density(f), real_or(p, "eta", 0.5));
  else if (kind == "misspec") v = misspec_metric(pr, f, get_or<std::size_t>(p, "g", comparator_of(pr)), real_at(p, "eta_bar"));
  else throw ConfigError("unknown divergence kind \"" + kind + "\"");
  return json{{"kind", kind}, {"value", real_to_json(v)}};
}

inline EnumerationPlan plan_from_json(const FiniteProblem& pr, const json& p, const RunContext& ctx) {
  EnumerationPlan plan;
  plan.problem = pr;
  plan.n = get_or<std::size_t>(p, "n", 1);
  plan.estimator = estimator_from_json(p);
  plan.prior = prior_from_json(p, "prior", pr.num_predictors());
  plan.eta = real_at(p, "eta");
  plan.cap = real_or(p, "cap", 1e6);
  plan.replicates = get_or<std::size_t>(p, "replicates", 100000);
  plan.seed = get_or<std::uint64_t>(p, "seed", ctx.seed);
  plan.threads = ctx.threads;
  plan.tol = real_or(p, "tol", 1e-10);
  return plan;
}

// Returns the outcomes as a JSON array (one entry, or one per delta).
inline json run_verify(const FiniteProblem& pr, const std::string& inequality, const json& p, const RunContext& ctx) {
  reject_unknown_keys(p,
                      {"problem", "n", "estimator", "prior", "eta", "cap", "replicates", "seed", "tol", "eta_bar", "u", "c",
                       "tau", "lambda", "v_eps", "eps", "branch", "deltas", "form"},
                      "plan");
  json out = json::array();
  if (inequality == "main-unbounded") {
    UnboundedPlan up;
    up.problem = pr;
    up.estimator = estimator_from_json(p);
    up.prior = prior_from_json(p, "prior", pr.num_predictors());
    up.n = get_or<std::size_t>(p, "n", 512);
    up.eta = real_at(p, "eta");
    up.eps = real_or(p, "eps", 0.0);
    up.v_eps = real_at(p, "v_eps");
    up.u = real_at(p, "u");
    up.c = real_at(p, "c");
    if (p.contains("deltas")) up.deltas = reals_from_json(p.at("deltas"));
    up.replicates = get_or<std::size_t>(p, "replicates", 2000);
    up.seed = get_or<std::uint64_t>(p, "seed", ctx.seed);
    up.threads = ctx.threads;
    for (const auto& o : verify_main_unbounded(up)) out.push_back(to_json(o));
    return out;
  }
  EnumerationPlan plan = plan_from_json(pr, p, ctx);
  if (inequality == "zhang") out.push_back(to_json(verify_zhang(plan)));
  else if (inequality == "zhang-minigrip") out.push_back(to_json(verify_zhang(plan, mini_grip_comparator_rows(pr, plan.eta))));
  else if (inequality == "metric") {
    const std::string form = get_or<std::string>(p, "form", "corrected");
    if (form != "corrected" && form != "literal") throw ConfigError("metric form must be \"corrected\" or \"literal\"");
    out.push_back(to_json(verify_metric_theorem(plan, real_at(p, "eta_bar"),
                                                form == "literal" ? MetricForm::Literal : MetricForm::Corrected)));
  }
  else if (inequality == "first-risk-bound") {
    if (p.contains("tau"))
      out.push_back(to_json(verify_first_risk_bound_tau(plan, real_at(p, "eta_bar"), tau_from_json(p.at("tau")), real_at(p, "c"),
                                                        real_at(p, "lambda"))));
    else
      out.push_back(to_json(verify_first_risk_bound(plan, real_at(p, "eta_bar"), real_at(p, "u"), real_at(p, "c"))));
  } else if (inequality == "main-bounded") {
    MainBoundedSpec s;
    s.v_eps = real_at(p, "v_eps");
    s.eps = real_or(p, "eps", 0.0);
    s.u = real_at(p, "u");
    s.c = real_at(p, "c");
    const std::string b = get_or<std::string>(p, "branch", "central");
    if (b != "central" && b != "ppc") throw ConfigError("branch must be \"central\" or \"ppc\"");
    s.branch = b == "central" ? Branch::Central : Branch::Ppc;
    out.push_back(to_json(verify_main_bounded(plan, s)));
  } else {
    throw ConfigError("unknown inequality \"" + inequality + "\"");
  }
  return out;
}

inline Verdict verdict_of(const json& outcomes) {
  Verdict worst = Verdict::Pass;
  for (const auto& o : outcomes) {
    const std::string v = o.at("verdict").get<std::string>();
    if (v == "fail") return Verdict::Fail;
    if (v != "pass") worst = Verdict::Inconclusive;
  }
  return worst;
}

// Information complexity of an estimator on a sample drawn from the problem.
inline json run_estimate(const FiniteProblem& pr, const json& p, const RunContext& ctx) {
  const std::size_t n = get_or<std::size_t>(p, "n", 1);
  const double eta = real_at(p, "eta");
  const EstimatorKind kind = estimator_from_json(p);
  const WeightVector prior = prior_from_json(p, "prior", pr.num_predictors()).value_or(WeightVector::uniform(pr.num_predictors()));
  Rng rng = substream(get_or<std::uint64_t>(p, "seed", ctx.seed), 0);
  DiscreteSampler draw(pr.probs);
  Sample s(n);
  for (auto& z : s) z = draw(rng);
  auto cum = cumulative_loss(pr, s);
  WeightVector post = estimate_from_cumulative(kind, prior, cum, eta, &rng);
  auto ic = information_complexity(pr, prior, post, s, eta, Comparator::index(comparator_of(pr)));
  json j{{"estimator", to_string(kind)}, {"eta", eta}, {"n", n}, {"sample", s}, {"posterior", to_json(post)}, {"ic", to_json(ic)}};
  if (kind == EstimatorKind::Erm || kind == EstimatorKind::TwoPart)
    j["index"] = std::distance(post.weights.begin(), std::max_element(post.weights.begin(), post.weights.end()));
  return j;
}

// One operation object: {"op": ..., plus its parameters}. Adds one entry to the report.
inline void run_operation(const FiniteProblem& pr, const json& op, const RunContext& ctx, Report& rep) {
  if (!op.is_object() || !op.contains("op")) throw ConfigError("operation: needs an \"op\" key");
  const std::string name = op.at("op").get<std::string>();
  json p = op;
  p.erase("op");
  auto take = [&](const char* key) {
    if (!p.contains(key)) throw ConfigError(name + ": missing \"" + key + "\"");
    std::string v = p.at(key).get<std::string>();
    p.erase(key);
    return v;
  };
  json params = p.contains("params") ? p.at("params") : json::object();
  if (name == "check") {
    const std::string cond = take("condition");
    p.erase("params");
    reject_unknown_keys(p, {}, "check");
    json r = run_check(pr, cond, params);
    rep.add("check:" + cond, r.at("holds").get<bool>() ? Verdict::Pass : Verdict::Fail, r);
  } else if (name == "grip") {
    json r = run_grip(pr, p);
    bool ok = !r.contains("central_holds") || r.at("central_holds").get<bool>();
    rep.add("grip", ok ? Verdict::Pass : Verdict::Fail, r);
  } else if (name == "divergence") {
    const std::string kind = take("kind");
    rep.add("divergence:" + kind, Verdict::Pass, run_divergence(pr, kind, p));
  } else if (name == "verify") {
    const std::string ineq = take("inequality");
    json outs = run_verify(pr, ineq, p, ctx);
    rep.add("verify:" + ineq, verdict_of(outs), json{{"outcomes", outs}});
  } else if (name == "estimate") {
    reject_unknown_keys(p, {"n", "eta", "estimator", "prior", "seed"}, "estimate");
    rep.add("estimate", Verdict::Pass, run_estimate(pr, p, ctx));
  } else {
    throw ConfigError("unknown operation \"" + name + "\"");
  }
}

// ---- bundled scenarios ----

namespace scenario {

inline void zhang_exact(const RunContext& ctx, Report& rep) {
  struct Shape {
    std::size_t nz, nf, n, problems;
  };
  const std::vector<Shape> shapes{{3, 3, 3, 25}, {2, 4, 6, 10}, {4, 3, 4, 5}};
  const std::vector<double> etas{0.1, 0.5, 1.0, 2.0};
  const std::vector<EstimatorKind> kinds{EstimatorKind::Bayes, EstimatorKind::TwoPart, EstimatorKind::Erm};
  for (const auto& sh : shapes) {
    for (double eta : etas) {
      for (int mapped = 0; mapped < 2; ++mapped) {
        for (EstimatorKind kind : kinds) {
          double worst = 0.0;
          for (std::size_t i = 0; i < sh.problems; ++i) {
            Rng rng = substream(ctx.seed, 1000 * sh.nz + 100 * sh.nf + i);
            EnumerationPlan plan;
            plan.problem = random_problem(rng, sh.nz, sh.nf, 2.0);
            plan.n = sh.n;
            plan.eta = eta;
            plan.estimator = kind;
            auto o = mapped ? verify_zhang(plan, mini_grip_comparator_rows(plan.problem, eta)) : verify_zhang(plan);
            worst = std::max(worst, o.moment_or_frequency);
          }
          const bool ok = worst <= 1.0 + 1e-10;
          rep.add(std::string(mapped ? "zhang-minigrip" : "zhang") + ":" + to_string(kind), ok ? Verdict::Pass : Verdict::Fail,
                  json{{"Z", sh.nz}, {"F", sh.nf}, {"n", sh.n}, {"eta", eta}, {"problems", sh.problems}, {"max_moment", worst}});
        }
      }
    }
  }
}

inline void no_bernstein_bounded_run(const RunContext&, Report& rep) {
  namespace nb = no_bernstein_bounded;
  const std::size_t J = 1000;
  FiniteProblem pr = nb::problem(J);
  const double a = nb::a();
  double worst = 0.0;
  for (std::size_t j = 2; j <= J; ++j) worst = std::max(worst, std::abs(excess_risk(pr, j - 1, 0) - nb::excess_risk()));
  double tail_direct = 1.0 - a;
  for (std::size_t j = 2; j <= J; ++j) tail_direct -= 1.0 / (static_cast<double>(j) * static_cast<double>(j));
  const double tail_gap = std::abs(tail_direct - inverse_square_tail(J));
  rep.expect("excess-risk", true, worst <= 1e-9 && tail_gap <= 1e-9,
             json{{"closed_form", nb::excess_risk()}, {"max_abs_error", worst}, {"tail_gap", tail_gap}, {"J", J}});
  rep.expect("central", true, check_strong_central(pr, 2.0).holds, json{{"eta_bar", 2.0}});
  const double c = nb::truncated_excess() / nb::excess_risk();
  auto w = check_witness(pr, 1.0, c);
  rep.expect("witness", true, w.holds, json{{"u", 1.0}, {"c", c}, {"report", to_json(w)}});
  for (double B = 1.0; B <= 1e5 * 1.0000001; B *= 10.0) {
    auto b = check_bernstein(pr, 1.0, B);
    rep.expect("bernstein", false, b.holds, json{{"beta", 1.0}, {"B", B}, {"report", to_json(b)}});
  }
  auto b6 = check_bernstein(pr, 1.0, 1e6);
  rep.add("bernstein-info", Verdict::Pass,
          json{{"beta", 1.0},
               {"B", 1e6},
               {"holds_at_this_J", b6.holds},
               {"first_violator_j", nb::bernstein_violator(1.0, 1e6)},
               {"B_min", real_to_json(b6.constants.count("B_min") ? b6.constants.at("B_min") : inf)}});
}

inline void gaussian_threshold(const RunContext& ctx, Report& rep) {
  const double ratio = real_or(ctx.params, "sigma_ratio", 2.0);
  if (!(ratio > 0.0)) throw ConfigError("sigma_ratio must be positive");
  const double sigma_star = 1.0, m = 0.3;
  ExpFamily fam = gaussian_location(sigma_star, -3.0, 3.0);
  GridDistribution P = gaussian_on_grid(m, sigma_star * std::sqrt(ratio), 401);
  auto thetas = linspace(-2.5, 2.5, 201);
  ThresholdReport th = central_threshold(fam, P, thetas);
  const double expect = 1.0 / ratio;
  rep.expect("certified-eta-bar", true, std::abs(th.eta_bar - expect) <= 0.02 * std::max(1.0, expect),
             json{{"eta_bar", th.eta_bar}, {"expected", expect}, {"sigma_ratio", ratio}, {"theta_star", th.theta_star}});
  auto worst = [&](double eta) {
    double w = -inf;
    for (double t : thetas)
      if (t != th.theta_star) w = std::max(w, central_moment_expfam(fam, P, t, eta, th.theta_star).log_moment);
    return w;
  };
  const double below = 0.9 * expect, above = 1.1 * expect;
  rep.expect("central-below", true, worst(below) <= 1e-13, json{{"eta", below}, {"max_log_moment", worst(below)}});
  rep.expect("central-above", false, worst(above) <= 1e-13, json{{"eta", above}, {"max_log_moment", worst(above)}});
  const std::vector<double> radii{1e-1, 1e-2, 1e-3};
  auto pts = local_limit_sweep(fam, P, radii);
  json arr = json::array();
  for (const auto& pt : pts) arr.push_back(json{{"radius", pt.radius}, {"eta_bar", pt.eta_bar}});
  const double lim = pts.back().eta_bar;
  rep.expect("local-limit", true, std::abs(lim / th.variance_ratio - 1.0) <= 0.02,
             json{{"points", arr}, {"variance_ratio", th.variance_ratio}});
}

inline void birge_massart(const RunContext& ctx, Report& rep) {
  for (double V : {2.0, 10.0, 100.0}) {
    const double cu = cu_constant(0.5, 1.0, std::log(V), 1.0);
    const bool constant_ok = std::abs(cu - (std::log(V) + 2.0)) <= 1e-12;
    double worst_ratio = 0.0;
    bool all = true;
    for (std::size_t i = 0; i < 500; ++i) {
      Rng rng = substream(ctx.seed, static_cast<std::uint64_t>(V) * 1000 + i);
      auto [p, q] = random_bounded_ratio_pair(rng, 6, V);
      double kl = kl_divergence(p, q), h = generalized_hellinger(p, q, 0.5);
      all = all && kl <= cu * h * (1.0 + 1e-12) + 1e-15;
      if (h > 0.0) worst_ratio = std::max(worst_ratio, kl / h);
    }
    rep.expect("kl-vs-hellinger", true, constant_ok && all,
               json{{"V", V}, {"constant", cu}, {"log_V_plus_2", std::log(V) + 2.0}, {"max_ratio", worst_ratio}, {"pairs", 500}});
  }
}

inline void eta_sweep_misspec(const RunContext&, Report& rep) {
  // two densities, neither convex-closed nor correct: eta = 1 overshoots eta_bar
  const std::vector<double> truth{0.55, 0.45};
  Matrix dens = Matrix::from_rows({{0.9, 0.1}, {0.1, 0.9}});
  FiniteProblem pr = log_loss_problem(truth, dens);
  const double eta_bar = max_central_eta(pr);
  const double exact = std::log(0.55 / 0.45) / std::log(9.0);
  rep.expect("eta-bar-below-one", true, eta_bar < 1.0 && std::abs(eta_bar - exact) <= 1e-8,
             json{{"eta_bar", eta_bar}, {"closed_form", exact}});
  const std::size_t n = 16;
  const std::size_t cmp = comparator_of(pr);
  const auto risks = detail::excess_risks(pr, cmp);
  json rows = json::array();
  double prev_ic = inf;
  bool monotone = true;
  for (double eta : {0.02, 0.05, 0.0913, 0.2, 0.5, 1.0, 2.0}) {
    EnumerationPlan plan;
    plan.problem = pr;
    plan.n = n;
    plan.eta = eta;
    const WeightVector prior = WeightVector::uniform(2);
    auto avg = detail::sample_average<2>(plan, detail::static_excess_rows(pr, cmp), [&](const detail::SampleView& v) {
      WeightVector post = bayes_from_cumulative(prior, v.cum_loss, eta);
      return std::array<double, 2>{bayes_ic_marginal(prior, v.cum_excess, eta, n), detail::posterior_mean(post, risks)};
    });
    monotone = monotone && avg.mean[0] <= prev_ic + 1e-12;
    prev_ic = avg.mean[0];
    rows.push_back(json{{"eta", eta}, {"expected_ic", avg.mean[0]}, {"expected_posterior_excess_risk", avg.mean[1]}});
  }
  rep.expect("ic-non-increasing-in-eta", true, monotone, json{{"n", n}, {"rows", rows}});
}

}  // namespace scenario

inline const std::map<std::string, std::function<void(const RunContext&, Report&)>>& scenario_registry() {
  static const std::map<std::string, std::function<void(const RunContext&, Report&)>> r{
      {"zhang-exact", scenario::zhang_exact},
      {"no-bernstein-bounded", scenario::no_bernstein_bounded_run},
      {"gaussian-threshold", scenario::gaussian_threshold},
      {"birge-massart", scenario::birge_massart},
      {"eta-sweep-misspec", scenario::eta_sweep_misspec},
  };
  return r;
}

// Runs a builtin scenario or a config document {"scenario" | "problem", "operations",
// "seed", "params", "output"}.
inline std::pair<json, Verdict> run_config(const json& cfg, RunContext ctx) {
  reject_unknown_keys(cfg, {"scenario", "problem", "operations", "seed", "params", "output"}, "config");
  if (cfg.contains("seed")) ctx.seed = cfg.at("seed").get<std::uint64_t>();
  if (cfg.contains("params")) {
    if (!cfg.at("params").is_object()) throw ConfigError("params must be an object");
    for (const auto& [k, v] : cfg.at("params").items()) ctx.params[k] = v;
  }
  if (cfg.contains("output")) reject_unknown_keys(cfg.at("output"), {"dir", "format"}, "output");
  Report rep;
  std::string name;
  if (cfg.contains("scenario")) {
    if (cfg.contains("problem") || cfg.contains("operations")) throw ConfigError("config: scenario excludes problem and operations");
    name = cfg.at("scenario").get<std::string>();
    auto it = scenario_registry().find(name);
    if (it == scenario_registry().end()) throw ConfigError("unknown scenario \"" + name + "\"");
    it->second(ctx, rep);
  } else {
    if (!cfg.contains("problem") || !cfg.contains("operations")) throw ConfigError("config: needs a scenario or a problem with operations");
    name = "inline";
    FiniteProblem pr = problem_from_spec(cfg.at("problem"));
    if (!cfg.at("operations").is_array()) throw ConfigError("operations must be an array");
    for (const auto& op : cfg.at("operations")) run_operation(pr, op, ctx, rep);
  }
  json echo = cfg;
  echo["seed"] = ctx.seed;
  echo["params"] = ctx.params;
  return {rep.document(name, echo), rep.verdict()};
}

inline std::pair<json, Verdict> run_scenario(const std::string& name, const RunContext& ctx) {
  return run_config(json{{"scenario", name}}, ctx);
}

// ---- sweeps: one inner operation re-run per grid value ----

inline void flatten_scalars(const json& j, const std::string& prefix, json& row) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten_scalars(v, key, row);
    else if (v.is_number() || v.is_boolean() || v.is_string()) row[key] = v;
  }
}

inline std::string sweep_csv(const std::string& param, std::span<const double> grid, const json& inner, const RunContext& ctx) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  if (param != "eta" && param != "n" && param != "epsilon") throw ConfigError("sweep: parameter must be eta, n or epsilon");
  reject_unknown_keys(inner, {"problem", "operations", "seed", "params", "output"}, "sweep config");
  if (!inner.contains("problem") || !inner.contains("operations") || inner.at("operations").size() != 1)
    throw ConfigError("sweep: inner config needs a problem and exactly one operation");
  FiniteProblem pr = problem_from_spec(inner.at("problem"));
  RunContext c = ctx;
  if (inner.contains("seed")) c.seed = inner.at("seed").get<std::uint64_t>();
  std::vector<json> rows;
  std::set<std::string> keys;
  for (double x : grid) {
    json op = inner.at("operations").at(0);
    const char* key = param == "epsilon" ? "eps" : param.c_str();
    json* target = op.contains("params") ? &op["params"] : &op;
    if (param == "n") (*target)[key] = static_cast<std::size_t>(x);
    else (*target)[key] = x;
    json row{{"param", param}, {"value", x}};
    try {
      Report rep;
      run_operation(pr, op, c, rep);
      const json& r = rep.results().at(0);
      if (r.contains("outcomes")) flatten_scalars(r.at("outcomes").at(0), "", row);
      else flatten_scalars(r, "", row);
      row["verdict"] = r.at("verdict");
    } catch (const std::exception& e) {
      row["error"] = e.what();
    }
    for (const auto& [k, v] : row.items()) keys.insert(k);
    rows.push_back(row);
  }
  std::vector<std::string> cols{"param", "value"};
  for (const auto& k : keys)
    if (k != "param" && k != "value" && k != "error") cols.push_back(k);
  cols.push_back("error");
  return to_csv(cols, rows);
}

}  // namespace fastrates

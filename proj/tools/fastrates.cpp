// fastrates: command-line front end for condition checks, GRIP, divergences,
// inequality verification, bundled scenarios and parameter sweeps.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fastrates/io.hpp"
#include "fastrates/scenarios.hpp"

namespace fr = fastrates;
using fr::json;

namespace {

constexpr int kConfigError = 64;

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out;
  std::string format = "json";
  unsigned threads = 1;
  bool with_timing = false;
};

void emit(const Globals& g, const std::string& stem, const std::string& body) {
  if (g.out.empty()) {
    std::cout << body;
    return;
  }
  std::filesystem::create_directories(g.out);
  const std::string path = (std::filesystem::path(g.out) / (stem + (g.format == "csv" ? ".csv" : ".json"))).string();
  std::ofstream f(path);
  if (!f) throw fr::ConfigError("cannot write " + path);
  f << body;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fr::RunContext context(const Globals& g) {
  fr::RunContext c;
  c.seed = g.seed;
  c.threads = g.threads == 0 ? fr::default_threads() : g.threads;
  return c;
}

json parse_inline(const std::string& s, const char* what) {
  if (s.empty()) return json::object();
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw fr::ConfigError(std::string(what) + ": " + e.what());
  }
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw fr::ConfigError("grid: cannot parse \"" + tok + "\"");
      }
    }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fastrates: excess-risk conditions and bounds on finite learning problems"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--seed", g.seed, "random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out", g.out, "output directory; stdout when absent");
  app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_flag("--with-timing", g.with_timing, "add wall time to reports (breaks byte identity)");

  std::string problem_path, params, condition, kind, inequality, plan_path, scenario, sweep_param, grid, descriptor;
  double eta = 0.0;
  long mini = -1;
  double sigma_ratio = 0.0;

  auto* check = app.add_subcommand("check", "certify a condition on a problem");
  check->add_option("condition", condition)->required();
  check->add_option("--problem", problem_path)->required();
  check->add_option("--params", params, "JSON object of condition parameters");

  auto* grip = app.add_subcommand("grip", "compute the GRIP or a mini-GRIP");
  grip->add_option("--problem", problem_path)->required();
  grip->add_option("--eta", eta)->required();
  grip->add_option("--mini", mini, "predictor index for the two-point mini-GRIP");

  auto* div = app.add_subcommand("divergence", "divergence between the truth and a predictor density");
  div->add_option("--kind", kind)->required()->check(CLI::IsMember({"kl", "renyi", "hellinger", "misspec"}));
  div->add_option("--problem", problem_path)->required();
  div->add_option("--params", params, "JSON object: f, g, alpha, eta, eta_bar");

  auto* ver = app.add_subcommand("verify", "check an inequality on a plan");
  ver->add_option("inequality", inequality)->required();
  ver->add_option("--plan", plan_path)->required();

  auto* run = app.add_subcommand("run", "run a bundled scenario or a config");
  run->add_option("scenario", scenario);
  run->add_option("--sigma-ratio", sigma_ratio, "variance ratio for gaussian-threshold");

  auto* sweep = app.add_subcommand("sweep", "re-run one operation over a grid; CSV out");
  sweep->add_option("param", sweep_param)->required()->check(CLI::IsMember({"eta", "n", "epsilon"}));
  sweep->add_option("--grid", grid, "comma-separated values")->required();

  auto* est = app.add_subcommand("estimate", "run an estimator on a seeded sample");
  est->add_option("--descriptor", descriptor, "JSON: problem, prior, eta, n, estimator, seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto timed = [&](json doc) {
    if (g.with_timing)
      doc["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return doc;
  };

  try {
    fr::RunContext ctx = context(g);
    if (*check) {
      auto pr = fr::load_problem(problem_path);
      json r = fr::run_check(pr, condition, parse_inline(params, "--params"));
      emit(g, "check", dump(timed(r)));
      return r.at("holds").get<bool>() ? 0 : 1;
    }
    if (*grip) {
      auto pr = fr::load_problem(problem_path);
      json p{{"eta", eta}};
      if (mini >= 0) p["mini"] = mini;
      json r = fr::run_grip(pr, p);
      emit(g, "grip", dump(timed(r)));
      return r.value("central_holds", true) ? 0 : 1;
    }
    if (*div) {
      auto pr = fr::load_problem(problem_path);
      emit(g, "divergence", dump(timed(fr::run_divergence(pr, kind, parse_inline(params, "--params")))));
      return 0;
    }
    if (*ver) {
      json plan = fr::read_json_file(plan_path);
      if (!plan.contains("problem")) throw fr::ConfigError("plan: needs a \"problem\"");
      auto pr = fr::problem_from_spec(plan.at("problem"));
      if (g.seed_set) plan["seed"] = g.seed;
      json outs = fr::run_verify(pr, inequality, plan, ctx);
      json doc = outs.size() == 1 ? outs.at(0) : json{{"outcomes", outs}};
      emit(g, "verify", dump(timed(doc)));
      return fr::exit_code(fr::verdict_of(outs));
    }
    if (*run) {
      json cfg;
      if (!g.config.empty()) {
        if (!scenario.empty()) throw fr::ConfigError("give either a scenario name or --config");
        cfg = fr::read_json_file(g.config);
      } else if (!scenario.empty()) {
        cfg = json{{"scenario", scenario}};
      } else {
        throw fr::ConfigError("run: needs a scenario name or --config");
      }
      if (g.seed_set) cfg["seed"] = g.seed;
      if (sigma_ratio > 0.0) cfg["params"]["sigma_ratio"] = sigma_ratio;
      if (cfg.contains("output")) {
        const json& o = cfg.at("output");
        if (g.out.empty() && o.contains("dir")) g.out = o.at("dir").get<std::string>();
        if (o.contains("format")) g.format = o.at("format").get<std::string>();
      }
      auto [doc, verdict] = fr::run_config(cfg, ctx);
      emit(g, "report", dump(timed(doc)));
      return fr::exit_code(verdict);
    }
    if (*sweep) {
      if (g.config.empty()) throw fr::ConfigError("sweep: needs --config with the inner experiment");
      auto values = parse_grid(grid);
      std::string csv = fr::sweep_csv(sweep_param, values, fr::read_json_file(g.config), ctx);
      Globals gc = g;
      gc.format = "csv";
      emit(gc, "sweep", csv);
      return 0;
    }
    if (*est) {
      json d = fr::read_json_file(descriptor);
      fr::reject_unknown_keys(d, {"problem", "prior", "eta", "n", "estimator", "seed"}, "descriptor");
      auto pr = fr::problem_from_spec(d.at("problem"));
      json p = d;
      p.erase("problem");
      if (g.seed_set) p["seed"] = g.seed;
      emit(g, "estimate", dump(timed(fr::run_estimate(pr, p, ctx))));
      return 0;
    }
  } catch (const fr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

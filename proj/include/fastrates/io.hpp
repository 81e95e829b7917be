#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fastrates/conditions.hpp"
#include "fastrates/estimators.hpp"
#include "fastrates/grip.hpp"
#include "fastrates/problem.hpp"
#include "fastrates/verify.hpp"

namespace fastrates {

using json = nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";

// Malformed input documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extended reals travel as numbers, with "inf", "-inf" and "nan" as strings.
inline json real_to_json(double x) {
  if (x == inf) return "inf";
  if (x == -inf) return "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

inline double real_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return inf;
    if (s == "-inf") return -inf;
    if (s == "nan") return std::nan("");
  }
  throw ConfigError("expected a number or \"inf\", got " + j.dump());
}

inline json reals_to_json(std::span<const double> xs) {
  json a = json::array();
  for (double x : xs) a.push_back(real_to_json(x));
  return a;
}

inline std::vector<double> reals_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers, got " + j.dump());
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(real_from_json(x));
  return out;
}

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key \"" + k + "\"");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key \"") + key + "\": " + e.what());
  }
}

inline double real_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? real_from_json(j.at(key)) : fallback;
}

inline double real_at(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key \"") + key + "\"");
  return real_from_json(j.at(key));
}

// ---- problems ----

inline json problem_to_json(const FiniteProblem& pr) {
  json j;
  j["outcomes"] = pr.outcomes;
  j["probs"] = reals_to_json(pr.probs);
  json rows = json::array();
  for (std::size_t f = 0; f < pr.num_predictors(); ++f) rows.push_back(reals_to_json(pr.loss.row(f)));
  j["loss_matrix"] = rows;
  j["labels"] = pr.labels;
  if (pr.comparator_index) j["comparator_index"] = *pr.comparator_index;
  return j;
}

inline FiniteProblem problem_from_json(const json& j) {
  reject_unknown_keys(j, {"outcomes", "probs", "loss_matrix", "labels", "comparator_index"}, "problem");
  if (!j.contains("probs") || !j.contains("loss_matrix")) throw ConfigError("problem: needs \"probs\" and \"loss_matrix\"");
  FiniteProblem pr;
  pr.probs = reals_from_json(j.at("probs"));
  std::vector<std::vector<double>> rows;
  if (!j.at("loss_matrix").is_array()) throw ConfigError("problem: loss_matrix must be an array of rows");
  for (const auto& r : j.at("loss_matrix")) rows.push_back(reals_from_json(r));
  try {
    pr.loss = Matrix::from_rows(rows);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  pr.outcomes = get_or<std::vector<std::string>>(j, "outcomes", {});
  pr.labels = get_or<std::vector<std::string>>(j, "labels", {});
  if (j.contains("comparator_index")) pr.comparator_index = j.at("comparator_index").get<std::size_t>();
  for (double x : pr.loss.data())
    if (x == -inf || std::isnan(x)) throw ConfigError("problem: loss entries must be finite or +inf");
  try {
    validate(pr);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  return pr;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline FiniteProblem load_problem(const std::string& path) { return problem_from_json(read_json_file(path)); }

// ---- results ----

inline json to_json(const WeightVector& w) { return reals_to_json(w.weights); }

inline json to_json(const ConditionReport& r) {
  json j;
  j["condition"] = to_string(r.condition);
  j["holds"] = r.holds;
  json c = json::object();
  for (const auto& [k, v] : r.constants) c[k] = real_to_json(v);
  j["constants"] = c;
  j["violator"] = r.violator ? json(*r.violator) : json(nullptr);
  j["margin"] = real_to_json(r.margin);
  j["tol"] = r.tol;
  j["notes"] = r.notes;
  return j;
}

inline json to_json(const GripResult& g) {
  return json{{"eta", g.eta},
              {"mixing_weights", to_json(g.mixing_weights)},
              {"grip_loss", reals_to_json(g.grip_loss)},
              {"objective", real_to_json(g.objective)},
              {"opt_gap", real_to_json(g.opt_gap)},
              {"iterations", g.iterations}};
}

inline GripResult grip_from_json(const json& j) {
  GripResult g;
  g.eta = real_at(j, "eta");
  g.mixing_weights.weights = reals_from_json(j.at("mixing_weights"));
  g.grip_loss = reals_from_json(j.at("grip_loss"));
  g.objective = real_at(j, "objective");
  g.opt_gap = real_at(j, "opt_gap");
  g.iterations = j.at("iterations").get<std::size_t>();
  return g;
}

inline json to_json(const InformationComplexity& ic) {
  return json{{"empirical_excess_term", real_to_json(ic.empirical_excess_term)},
              {"kl_term", real_to_json(ic.kl_term)},
              {"total", real_to_json(ic.total)},
              {"eta", ic.eta},
              {"n", ic.n}};
}

inline json to_json(const VerifyOutcome& o) {
  json d = json::object();
  for (const auto& [k, v] : o.details) d[k] = real_to_json(v);
  return json{{"inequality", o.inequality},
              {"moment_or_frequency", real_to_json(o.moment_or_frequency)},
              {"threshold", real_to_json(o.threshold)},
              {"passed", o.passed},
              {"verdict", to_string(o.verdict)},
              {"standard_error", real_to_json(o.standard_error)},
              {"replicates_or_states", o.replicates_or_states},
              {"exact", o.exact},
              {"details", d},
              {"notes", o.notes}};
}

// ---- GRIP memo keyed by (problem hash, eta, tol) ----

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string grip_cache_key(const FiniteProblem& pr, double eta, double tol) {
  json k{{"problem", problem_to_json(pr)}, {"eta", eta}, {"tol", tol}};
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(k.dump());
  return os.str();
}

// compute_grip, memoized under $FASTRATES_CACHE_DIR when that variable is set.
inline GripResult cached_grip(const FiniteProblem& pr, double eta, const GripOptions& opt = {}) {
  const char* dir = std::getenv("FASTRATES_CACHE_DIR");
  if (!dir || !*dir) return compute_grip(pr, eta, opt);
  namespace fs = std::filesystem;
  fs::path path = fs::path(dir) / ("grip-" + grip_cache_key(pr, eta, opt.tol) + ".json");
  if (fs::exists(path)) {
    try {
      return grip_from_json(read_json_file(path.string()));
    } catch (const std::exception&) {
      // unreadable entries are recomputed and overwritten
    }
  }
  GripResult g = compute_grip(pr, eta, opt);
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream out(path);
  if (out) out << to_json(g).dump() << '\n';
  return g;
}

// ---- CSV ----

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return v.dump();
}

// Rows are flat objects; the header is the given column order.
inline std::string to_csv(const std::vector<std::string>& columns, const std::vector<json>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) os << ',';
      if (r.contains(columns[i])) os << csv_cell(r.at(columns[i]));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fastrates

#pragma once

// Sectioned key-value run configuration.
//
//   # comment
//   [section]
//   key = 1.5            number
//   key = "text"         string
//   key = true           boolean
//   key = [1, 2, 3]      list of numbers
//   key = { a = 1, b = "x" }   inline table (used for `dissipation = {...}`)
//
// Every key is checked against the schema below; unknown keys are errors.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bvflow/bv.hpp"
#include "bvflow/common.hpp"
#include "bvflow/dissipation.hpp"
#include "bvflow/family.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/metric.hpp"
#include "bvflow/system.hpp"
#include "bvflow/transition.hpp"

namespace bvflow {

struct ConfigValue {
  enum class Kind { Number, String, Bool, List, Table };
  Kind kind = Kind::Number;
  double number = 0.0;
  std::string text;
  bool flag = false;
  std::vector<double> list;
  std::map<std::string, ConfigValue> table;
  int line = 0;
};

/// section -> key -> value; keys before the first section header live in section "".
using ConfigDocument = std::map<std::string, std::map<std::string, ConfigValue>>;

namespace detail {

class ConfigLexer {
 public:
  ConfigLexer(const std::string& s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }
  double number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }
  ConfigValue value() {
    ConfigValue v;
    v.line = line_;
    const char c = peek();
    if (c == '"') {
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') ++pos_;
      if (pos_ >= s_.size()) fail("unterminated string");
      v.kind = ConfigValue::Kind::String;
      v.text = s_.substr(start, pos_ - start);
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      v.kind = ConfigValue::Kind::List;
      if (peek() == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.list.push_back(number());
        if (peek() == ',') {
          ++pos_;
          if (peek() == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        expect(']');
        break;
      }
    } else if (c == '{') {
      ++pos_;
      v.kind = ConfigValue::Kind::Table;
      if (peek() == '}') {
        ++pos_;
        return v;
      }
      while (true) {
        const std::string key = identifier();
        expect('=');
        if (v.table.count(key)) fail("duplicate key '" + key + "'");
        v.table[key] = value();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect('}');
        break;
      }
    } else if (s_.compare(pos_, 4, "true") == 0 || s_.compare(pos_, 5, "false") == 0) {
      v.kind = ConfigValue::Kind::Bool;
      v.flag = s_[pos_] == 't';
      pos_ += v.flag ? 4 : 5;
    } else {
      v.kind = ConfigValue::Kind::Number;
      v.number = number();
    }
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

 private:
  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ConfigDocument parse_config_document(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    detail::ConfigLexer lex(raw, line);
    if (lex.at_end()) continue;
    if (lex.peek() == '[') {
      lex.expect('[');
      section = lex.identifier();
      lex.expect(']');
      if (!lex.at_end()) lex.fail("unexpected text after section header");
      if (doc.count(section)) lex.fail("duplicate section [" + section + "]");
      doc[section];
      continue;
    }
    const std::string key = lex.identifier();
    lex.expect('=');
    ConfigValue v = lex.value();
    if (!lex.at_end()) lex.fail("unexpected text after value of '" + key + "'");
    auto& sec = doc[section];
    if (sec.count(key)) lex.fail("duplicate key '" + key + "'");
    sec[key] = std::move(v);
  }
  return doc;
}

struct SystemConfig {
  std::string name = "double_well_1d";
  int dimension = 1;
  std::vector<double> potential{0.25, 0.0, -0.5, 0.0, 0.25};  // ascending powers of u
  std::vector<double> load{0.0};                               // ascending powers of t
  std::vector<double> load_profile;
  double length = 1.0;
  std::vector<double> initial_state;  // empty: all zeros
};

struct MetricConfig {
  std::string kind = "default";  // default | euclidean | diagonal | riemannian
  std::vector<double> weights;
  double conformal = 0.0;  // riemannian: G(u) = diag(w_i (1 + c u_i^2)^2)
};

struct DissipationConfig {
  std::string family = "power";
  double p = 2.0;
  double eps = 0.0;
  double L = 1.0;
};

struct GridConfig {
  double T = 1.0;
  int steps = 100;
  std::vector<double> nodes;
};

struct SolverConfig {
  std::string method = "minimizing_movement";  // or direct_ode
  double tol = 1e-10;
  int max_iter = 200;
  int prox_max_iter = 20000;
  int multistart = 4;
  int seed = 20240101;
  double audit_tol = 1e-2;  // bound on |ED residual| reported as the audit verdict
};

struct FamilyConfig {
  bool present = false;
  std::string law = "p_to_one";
  double ratio = 0.5;
  int count = 6;
  int first = 1;
  double p_limit = 1.0;
  double eps_power = 2.0;
  bool parallel = true;
  double excess_offset = 0.1;
};

struct BVConfig {
  double delta_jump = 20.0;
  double abs_floor_rel = 1e-3;
  double abs_floor = 0.0;  // 0: derived from abs_floor_rel
  double tol_stab = 0.05;
  double tol_eb_rel = 0.05;
  int dyadic_levels = 3;
  int window_margin = 2;
  int bicost_nodes = 64;
  int bicost_starts = 8;
};

struct OutputConfig {
  std::string dir;  // empty: --out, then BVFLOW_OUT_DIR, then "bvflow_out"
  bool members = true;
};

struct RunConfig {
  SystemConfig system;
  MetricConfig metric;
  DissipationConfig dissipation;
  GridConfig grid;
  SolverConfig solver;
  FamilyConfig family;
  BVConfig bv;
  OutputConfig output;
};

namespace detail {

class SectionReader {
 public:
  SectionReader(std::string name, const std::map<std::string, ConfigValue>* entries)
      : name_(std::move(name)), entries_(entries) {}

  void number(const char* key, double& out) {
    if (const auto* v = take(key)) out = as_number(*v, key);
  }
  void integer(const char* key, int& out) {
    if (const auto* v = take(key)) {
      const double x = as_number(*v, key);
      if (x != std::floor(x) || std::abs(x) > 2e9) fail(*v, key, "must be an integer");
      out = static_cast<int>(x);
    }
  }
  void text(const char* key, std::string& out) {
    if (const auto* v = take(key)) {
      if (v->kind != ConfigValue::Kind::String) fail(*v, key, "must be a string");
      out = v->text;
    }
  }
  void flag(const char* key, bool& out) {
    if (const auto* v = take(key)) {
      if (v->kind != ConfigValue::Kind::Bool) fail(*v, key, "must be true or false");
      out = v->flag;
    }
  }
  void list(const char* key, std::vector<double>& out) {
    if (const auto* v = take(key)) {
      if (v->kind != ConfigValue::Kind::List) fail(*v, key, "must be a list of numbers");
      out = v->list;
    }
  }
  bool has(const char* key) const { return entries_ && entries_->count(key); }
  void finish() const {
    if (!entries_) return;
    for (const auto& [key, v] : *entries_) {
      if (!used_.count(key)) {
        throw ConfigError("line " + std::to_string(v.line) + ": unknown key '" + key + "' in [" + name_ + "]");
      }
    }
  }

 private:
  const ConfigValue* take(const char* key) {
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    if (it == entries_->end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }
  double as_number(const ConfigValue& v, const char* key) const {
    if (v.kind != ConfigValue::Kind::Number) fail(v, key, "must be a number");
    return v.number;
  }
  [[noreturn]] void fail(const ConfigValue& v, const char* key, const char* what) const {
    throw ConfigError("line " + std::to_string(v.line) + ": [" + name_ + "] " + key + " " + what);
  }

  std::string name_;
  const std::map<std::string, ConfigValue>* entries_;
  std::set<std::string> used_;
};

inline void read_dissipation(SectionReader& r, DissipationConfig& d) {
  r.text("family", d.family);
  static const std::map<std::string, std::set<std::string>> allowed{
      {"power", {"p"}},
      {"viscous_linear", {"eps", "p"}},
      {"capped_quadratic", {"L"}},
      {"pseudo_relativistic", {}},
      {"linear", {"L"}},
  };
  auto it = allowed.find(d.family);
  if (it == allowed.end()) throw ConfigError("unknown dissipation family '" + d.family + "'");
  for (const char* key : {"p", "eps", "L"}) {
    if (r.has(key) && !it->second.count(key)) {
      throw ConfigError("dissipation key '" + std::string(key) + "' is not used by family " + d.family);
    }
  }
  r.number("p", d.p);
  r.number("eps", d.eps);
  r.number("L", d.L);
  r.finish();
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  const ConfigDocument doc = parse_config_document(text);
  static const std::set<std::string> sections{"system", "metric", "dissipation", "grid",
                                              "solver", "family", "bv",          "output"};
  for (const auto& [name, entries] : doc) {
    if (!name.empty() && !sections.count(name)) throw ConfigError("unknown section [" + name + "]");
  }
  auto section = [&](const std::string& name) -> const std::map<std::string, ConfigValue>* {
    auto it = doc.find(name);
    return it == doc.end() ? nullptr : &it->second;
  };
  RunConfig cfg;

  // Root level accepts only the inline dissipation table.
  if (const auto* root = section("")) {
    for (const auto& [key, v] : *root) {
      if (key != "dissipation") {
        throw ConfigError("line " + std::to_string(v.line) + ": unknown key '" + key + "' outside a section");
      }
      if (v.kind != ConfigValue::Kind::Table) {
        throw ConfigError("line " + std::to_string(v.line) + ": dissipation must be an inline table");
      }
      if (section("dissipation")) throw ConfigError("dissipation given both inline and as a section");
      detail::SectionReader r("dissipation", &v.table);
      detail::read_dissipation(r, cfg.dissipation);
    }
  }
  if (const auto* d = section("dissipation")) {
    detail::SectionReader r("dissipation", d);
    detail::read_dissipation(r, cfg.dissipation);
  }
  {
    detail::SectionReader r("system", section("system"));
    r.text("name", cfg.system.name);
    r.integer("dimension", cfg.system.dimension);
    r.list("potential", cfg.system.potential);
    r.list("load", cfg.system.load);
    r.list("load_profile", cfg.system.load_profile);
    r.number("length", cfg.system.length);
    r.list("initial_state", cfg.system.initial_state);
    r.finish();
  }
  {
    detail::SectionReader r("metric", section("metric"));
    r.text("kind", cfg.metric.kind);
    r.list("weights", cfg.metric.weights);
    r.number("conformal", cfg.metric.conformal);
    r.finish();
  }
  {
    detail::SectionReader r("grid", section("grid"));
    r.number("T", cfg.grid.T);
    r.integer("steps", cfg.grid.steps);
    r.list("nodes", cfg.grid.nodes);
    r.finish();
  }
  {
    detail::SectionReader r("solver", section("solver"));
    r.text("method", cfg.solver.method);
    r.number("tol", cfg.solver.tol);
    r.integer("max_iter", cfg.solver.max_iter);
    r.integer("prox_max_iter", cfg.solver.prox_max_iter);
    r.integer("multistart", cfg.solver.multistart);
    r.integer("seed", cfg.solver.seed);
    r.number("audit_tol", cfg.solver.audit_tol);
    r.finish();
  }
  {
    cfg.family.present = section("family") != nullptr;
    detail::SectionReader r("family", section("family"));
    r.text("law", cfg.family.law);
    r.number("ratio", cfg.family.ratio);
    r.integer("count", cfg.family.count);
    r.integer("first", cfg.family.first);
    r.number("p_limit", cfg.family.p_limit);
    r.number("eps_power", cfg.family.eps_power);
    r.flag("parallel", cfg.family.parallel);
    r.number("excess_offset", cfg.family.excess_offset);
    r.finish();
  }
  {
    detail::SectionReader r("bv", section("bv"));
    r.number("delta_jump", cfg.bv.delta_jump);
    r.number("abs_floor_rel", cfg.bv.abs_floor_rel);
    r.number("abs_floor", cfg.bv.abs_floor);
    r.number("tol_stab", cfg.bv.tol_stab);
    r.number("tol_eb_rel", cfg.bv.tol_eb_rel);
    r.integer("dyadic_levels", cfg.bv.dyadic_levels);
    r.integer("window_margin", cfg.bv.window_margin);
    r.integer("bicost_nodes", cfg.bv.bicost_nodes);
    r.integer("bicost_starts", cfg.bv.bicost_starts);
    r.finish();
  }
  {
    detail::SectionReader r("output", section("output"));
    r.text("dir", cfg.output.dir);
    r.flag("members", cfg.output.members);
    r.finish();
  }

  // Semantic validation.
  static const std::set<std::string> systems{"double_well_1d", "allen_cahn_fd", "quadratic", "marginal_demo"};
  if (!systems.count(cfg.system.name)) throw ConfigError("unknown system '" + cfg.system.name + "'");
  if (cfg.system.dimension < 1) throw ConfigError("[system] dimension must be positive");
  if (!cfg.system.initial_state.empty() &&
      static_cast<int>(cfg.system.initial_state.size()) != cfg.system.dimension) {
    throw ConfigError("[system] initial_state must have `dimension` entries");
  }
  static const std::set<std::string> metrics{"default", "euclidean", "diagonal", "riemannian"};
  if (!metrics.count(cfg.metric.kind)) throw ConfigError("unknown metric kind '" + cfg.metric.kind + "'");
  if ((cfg.metric.kind == "diagonal" || cfg.metric.kind == "riemannian") &&
      static_cast<int>(cfg.metric.weights.size()) != cfg.system.dimension) {
    throw ConfigError("[metric] weights must have `dimension` entries");
  }
  if (cfg.grid.nodes.empty()) {
    if (!(cfg.grid.T > 0.0)) throw ConfigError("[grid] T must be positive");
    if (cfg.grid.steps < 1) throw ConfigError("[grid] steps must be at least 1");
  }
  if (cfg.solver.method != "minimizing_movement" && cfg.solver.method != "direct_ode") {
    throw ConfigError("unknown solver method '" + cfg.solver.method + "'");
  }
  if (cfg.solver.max_iter < 1 || cfg.solver.prox_max_iter < 1 || cfg.solver.multistart < 0) {
    throw ConfigError("[solver] iteration counts must be positive");
  }
  if (cfg.family.law != "p_to_one" && cfg.family.law != "eps_to_zero" && cfg.family.law != "p_to_limit") {
    throw ConfigError("unknown family law '" + cfg.family.law + "'");
  }
  if (cfg.family.count < 1) throw ConfigError("[family] count must be at least 1");
  if (!(cfg.family.ratio > 0.0 && cfg.family.ratio < 1.0)) throw ConfigError("[family] ratio must lie in (0, 1)");
  if (!(cfg.family.excess_offset > 0.0)) throw ConfigError("[family] excess_offset must be positive");
  if (cfg.bv.dyadic_levels < 0 || cfg.bv.window_margin < 0 || cfg.bv.bicost_nodes < 2 || cfg.bv.bicost_starts < 1) {
    throw ConfigError("[bv] counts out of range");
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace detail {

inline std::string fmt_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt_number(xs[i]);
  }
  return out + "]";
}

}  // namespace detail

/// Canonical rendering with every default resolved; parse_config(echo) reproduces cfg.
inline std::string effective_config(const RunConfig& cfg) {
  using detail::fmt_list;
  using detail::fmt_number;
  std::ostringstream o;
  auto str = [](const std::string& s) { return "\"" + s + "\""; };
  auto b = [](bool x) { return x ? "true" : "false"; };
  o << "[system]\n"
    << "name = " << str(cfg.system.name) << "\n"
    << "dimension = " << cfg.system.dimension << "\n"
    << "potential = " << fmt_list(cfg.system.potential) << "\n"
    << "load = " << fmt_list(cfg.system.load) << "\n"
    << "load_profile = " << fmt_list(cfg.system.load_profile) << "\n"
    << "length = " << fmt_number(cfg.system.length) << "\n"
    << "initial_state = " << fmt_list(cfg.system.initial_state) << "\n\n";
  o << "[metric]\n"
    << "kind = " << str(cfg.metric.kind) << "\n"
    << "weights = " << fmt_list(cfg.metric.weights) << "\n"
    << "conformal = " << fmt_number(cfg.metric.conformal) << "\n\n";
  o << "[dissipation]\n"
    << "family = " << str(cfg.dissipation.family) << "\n";
  const auto& fam = cfg.dissipation.family;
  if (fam == "power" || fam == "viscous_linear") o << "p = " << fmt_number(cfg.dissipation.p) << "\n";
  if (fam == "viscous_linear") o << "eps = " << fmt_number(cfg.dissipation.eps) << "\n";
  if (fam == "capped_quadratic" || fam == "linear") o << "L = " << fmt_number(cfg.dissipation.L) << "\n";
  o << "\n[grid]\n"
    << "T = " << fmt_number(cfg.grid.T) << "\n"
    << "steps = " << cfg.grid.steps << "\n"
    << "nodes = " << fmt_list(cfg.grid.nodes) << "\n\n";
  o << "[solver]\n"
    << "method = " << str(cfg.solver.method) << "\n"
    << "tol = " << fmt_number(cfg.solver.tol) << "\n"
    << "max_iter = " << cfg.solver.max_iter << "\n"
    << "prox_max_iter = " << cfg.solver.prox_max_iter << "\n"
    << "multistart = " << cfg.solver.multistart << "\n"
    << "seed = " << cfg.solver.seed << "\n"
    << "audit_tol = " << fmt_number(cfg.solver.audit_tol) << "\n\n";
  if (cfg.family.present) {
    o << "[family]\n"
      << "law = " << str(cfg.family.law) << "\n"
      << "ratio = " << fmt_number(cfg.family.ratio) << "\n"
      << "count = " << cfg.family.count << "\n"
      << "first = " << cfg.family.first << "\n"
      << "p_limit = " << fmt_number(cfg.family.p_limit) << "\n"
      << "eps_power = " << fmt_number(cfg.family.eps_power) << "\n"
      << "parallel = " << b(cfg.family.parallel) << "\n"
      << "excess_offset = " << fmt_number(cfg.family.excess_offset) << "\n\n";
  }
  o << "[bv]\n"
    << "delta_jump = " << fmt_number(cfg.bv.delta_jump) << "\n"
    << "abs_floor_rel = " << fmt_number(cfg.bv.abs_floor_rel) << "\n"
    << "abs_floor = " << fmt_number(cfg.bv.abs_floor) << "\n"
    << "tol_stab = " << fmt_number(cfg.bv.tol_stab) << "\n"
    << "tol_eb_rel = " << fmt_number(cfg.bv.tol_eb_rel) << "\n"
    << "dyadic_levels = " << cfg.bv.dyadic_levels << "\n"
    << "window_margin = " << cfg.bv.window_margin << "\n"
    << "bicost_nodes = " << cfg.bv.bicost_nodes << "\n"
    << "bicost_starts = " << cfg.bv.bicost_starts << "\n\n";
  o << "[output]\n"
    << "dir = " << str(cfg.output.dir) << "\n"
    << "members = " << b(cfg.output.members) << "\n";
  return o.str();
}

// Builders from a validated configuration. Domain errors raised here are configuration
// errors from the caller's point of view.

inline DissipationFunction build_dissipation(const DissipationConfig& d) {
  if (d.family == "power") return DissipationFunction::power(d.p);
  if (d.family == "viscous_linear") return DissipationFunction::viscous_linear(d.eps, d.p);
  if (d.family == "capped_quadratic") return DissipationFunction::capped_quadratic(d.L);
  if (d.family == "pseudo_relativistic") return DissipationFunction::pseudo_relativistic();
  if (d.family == "linear") return DissipationFunction::linear(d.L);
  throw ConfigError("unknown dissipation family '" + d.family + "'");
}

inline std::optional<MetricStructure> build_metric(const MetricConfig& m) {
  if (m.kind == "default") return std::nullopt;
  if (m.kind == "euclidean") return MetricStructure::euclidean();
  const Vector w = Eigen::Map<const Vector>(m.weights.data(), static_cast<Eigen::Index>(m.weights.size()));
  if (m.kind == "diagonal") return MetricStructure::diagonal(w);
  if (m.kind == "riemannian") {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (!(w[i] > 0.0)) throw MetricError("riemannian weights must be positive");
    }
    const double c = m.conformal;
    return MetricStructure::riemannian([w, c](const Vector& u) -> Matrix {
      Vector d(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double f = 1.0 + c * u[i] * u[i];
        d[i] = w[i] * f * f;
      }
      return d.asDiagonal();
    });
  }
  throw ConfigError("unknown metric kind '" + m.kind + "'");
}

inline TimeGrid build_grid(const GridConfig& g) {
  if (!g.nodes.empty()) return TimeGrid::from_nodes(g.nodes);
  return TimeGrid::uniform(g.T, static_cast<std::size_t>(g.steps));
}

inline EvolutionSystem build_system(const RunConfig& cfg) {
  ExampleParams p;
  p.dimension = cfg.system.dimension;
  p.horizon = build_grid(cfg.grid).horizon();
  p.potential = Polynomial{cfg.system.potential};
  p.load = Polynomial{cfg.system.load};
  p.load_profile = cfg.system.load_profile;
  p.length = cfg.system.length;
  p.metric = build_metric(cfg.metric);
  return make_example(cfg.system.name, p);
}

inline Vector build_initial_state(const RunConfig& cfg) {
  if (cfg.system.initial_state.empty()) return Vector::Zero(cfg.system.dimension);
  return Eigen::Map<const Vector>(cfg.system.initial_state.data(),
                                  static_cast<Eigen::Index>(cfg.system.initial_state.size()));
}

inline SolverOptions build_solver(const SolverConfig& s) {
  SolverOptions o;
  o.tol = s.tol;
  o.max_iter = s.max_iter;
  o.prox_max_iter = s.prox_max_iter;
  o.multistart = s.multistart;
  o.seed = static_cast<std::uint64_t>(s.seed);
  return o;
}

inline JumpOptions build_jump_options(const BVConfig& b) {
  JumpOptions o;
  o.delta_jump = b.delta_jump;
  o.abs_floor_rel = b.abs_floor_rel;
  if (b.abs_floor > 0.0) o.abs_floor = b.abs_floor;
  return o;
}

inline BVValidationOptions build_bv_options(const BVConfig& b) {
  BVValidationOptions o;
  o.tol_stab = b.tol_stab;
  o.tol_eb_rel = b.tol_eb_rel;
  o.dyadic_levels = b.dyadic_levels;
  o.window_margin = static_cast<std::size_t>(b.window_margin);
  o.bicost.nodes = static_cast<std::size_t>(b.bicost_nodes);
  o.bicost.starts = b.bicost_starts;
  return o;
}

inline BicostOptions build_bicost_options(const BVConfig& b) {
  BicostOptions o;
  o.nodes = static_cast<std::size_t>(b.bicost_nodes);
  o.starts = b.bicost_starts;
  return o;
}

inline FamilySpec build_family(const RunConfig& cfg) {
  const auto& f = cfg.family;
  const FamilyLaw law = f.law == "p_to_one"      ? FamilyLaw::PToOne
                        : f.law == "eps_to_zero" ? FamilyLaw::EpsToZero
                                                 : FamilyLaw::PToLimit;
  FamilySpec spec{build_system(cfg), law,  f.ratio, f.count, f.first, f.p_limit, f.eps_power,
                  build_initial_state(cfg), build_grid(cfg.grid), build_solver(cfg.solver), f.parallel};
  spec.validate();
  return spec;
}

}  // namespace bvflow

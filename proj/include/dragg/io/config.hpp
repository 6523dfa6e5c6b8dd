#pragma once

// Run configuration in a small TOML subset:
//
//   file    := line*
//   line    := ws (comment | section | pair)? ws comment? EOL
//   section := '[' name ']'
//   pair    := key ws '=' ws value
//   value   := string | number | bool | '[' (value (',' value)*)? ']'
//   string  := '"' (char | '\"' | '\\')* '"'
//   comment := '#' any*
//
// Keys are [A-Za-z0-9_-]+; arrays are single-line and flat. Unknown sections
// or keys are errors so that typos do not silently fall back to defaults.

#include "dragg/core.hpp"
#include "dragg/io/data.hpp"
#include "dragg/learning.hpp"
#include "dragg/sim.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace dragg::io {

struct TomlValue;
using TomlArray = std::vector<TomlValue>;
struct TomlValue {
  std::variant<std::string, double, bool, TomlArray> v;
};
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

namespace detail {

struct TomlCursor {
  const std::string& s;
  std::size_t i;
  std::size_t line;
  std::string path;

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(path + ":" + std::to_string(line) + ": " + msg);
  }
  void ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() const { return i >= s.size(); }
};

inline TomlValue parse_toml_value(TomlCursor& c) {
  c.ws();
  if (c.done()) c.fail("missing value");
  const char ch = c.s[c.i];
  if (ch == '"') {
    std::string out;
    ++c.i;
    while (true) {
      if (c.done()) c.fail("unterminated string");
      char x = c.s[c.i++];
      if (x == '"') break;
      if (x == '\\') {
        if (c.done()) c.fail("unterminated escape");
        x = c.s[c.i++];
        if (x != '"' && x != '\\') c.fail(std::string("unsupported escape \\") + x);
      }
      out += x;
    }
    return {out};
  }
  if (ch == '[') {
    ++c.i;
    TomlArray arr;
    c.ws();
    if (!c.done() && c.s[c.i] == ']') {
      ++c.i;
      return {arr};
    }
    while (true) {
      arr.push_back(parse_toml_value(c));
      c.ws();
      if (c.done()) c.fail("unterminated array");
      if (c.s[c.i] == ',') {
        ++c.i;
        continue;
      }
      if (c.s[c.i] == ']') {
        ++c.i;
        break;
      }
      c.fail("expected ',' or ']' in array");
    }
    return {arr};
  }
  std::size_t j = c.i;
  while (j < c.s.size() && c.s[j] != ',' && c.s[j] != ']' && c.s[j] != '#' && c.s[j] != ' ' && c.s[j] != '\t') ++j;
  const std::string tok = c.s.substr(c.i, j - c.i);
  c.i = j;
  if (tok == "true") return {true};
  if (tok == "false") return {false};
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return {v};
  } catch (const std::exception&) {
    c.fail("bad value '" + tok + "'");
  }
}

inline bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char ch : k) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
  }
  return true;
}

}  // namespace detail

inline TomlTable parse_toml(const std::string& text, const std::string& path = "<config>") {
  TomlTable out;
  std::string section;
  out[section];
  std::istringstream in(text);
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    detail::TomlCursor c{raw, 0, n, path};
    c.ws();
    if (c.done() || raw[c.i] == '#') continue;
    if (raw[c.i] == '[') {
      const auto close = raw.find(']', c.i);
      if (close == std::string::npos) c.fail("unterminated section header");
      section = raw.substr(c.i + 1, close - c.i - 1);
      if (!detail::valid_key(section)) c.fail("bad section name '" + section + "'");
      c.i = close + 1;
      out[section];
    } else {
      const auto eq = raw.find('=', c.i);
      if (eq == std::string::npos) c.fail("expected key = value");
      std::string key = raw.substr(c.i, eq - c.i);
      while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
      if (!detail::valid_key(key)) c.fail("bad key '" + key + "'");
      c.i = eq + 1;
      TomlValue v = detail::parse_toml_value(c);
      if (!out[section].emplace(key, std::move(v)).second) c.fail("duplicate key '" + key + "'");
    }
    c.ws();
    if (!c.done() && raw[c.i] != '#') c.fail("trailing characters");
  }
  return out;
}

//---------------------------------------------------------------------------//
// RunConfig
//---------------------------------------------------------------------------//

struct RunConfig {
  // [data]
  std::string lmp_path;
  std::string demand_path;
  std::string lmp_format = "plain";  // plain | caiso
  std::string node;
  std::size_t horizon = kDefaultHorizon;
  // [game]
  double a = 2.0;
  std::string q_rule = "fraction:0.01";
  double u_scale = 1.0;
  std::optional<double> u;
  std::optional<double> p_max;
  std::size_t buildings = 0;  // 0 = all
  // [learner]
  std::size_t samples = 100;
  double forgetting = 0.98;
  double pi0_scale = 10.0;
  std::optional<double> change_tol;
  std::optional<std::size_t> pe_window;
  // [basis]
  std::string basis = "affine";
  // [optimizer]
  std::size_t restarts = 16;
  // [run]
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0 = all cores
  std::string out_dir = "out";
  std::string date;
  // [sweep]
  std::vector<double> sweep_a;
  std::vector<std::string> sweep_q_rule;
  std::vector<std::size_t> sweep_samples;
  std::vector<std::size_t> sweep_buildings;
  std::vector<std::uint64_t> sweep_seeds;
  std::vector<std::string> sweep_dates;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

struct TomlReader {
  const TomlTable& t;
  std::string path;
  std::set<std::pair<std::string, std::string>> used;

  const TomlValue* find(const std::string& sec, const std::string& key) {
    auto s = t.find(sec);
    if (s == t.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used.emplace(sec, key);
    return &k->second;
  }
  [[noreturn]] void type_error(const std::string& sec, const std::string& key, const char* want) const {
    throw DataError(path + ": [" + sec + "] " + key + " must be " + want);
  }
  double num(const TomlValue& v, const std::string& sec, const std::string& key) const {
    if (auto p = std::get_if<double>(&v.v)) return *p;
    type_error(sec, key, "a number");
  }
  std::size_t count(const TomlValue& v, const std::string& sec, const std::string& key) const {
    const double d = num(v, sec, key);
    if (d < 0.0 || d != std::floor(d) || d > 9.0e15) type_error(sec, key, "a non-negative integer");
    return static_cast<std::size_t>(d);
  }
  std::string str(const TomlValue& v, const std::string& sec, const std::string& key) const {
    if (auto p = std::get_if<std::string>(&v.v)) return *p;
    type_error(sec, key, "a string");
  }
  const TomlArray& arr(const TomlValue& v, const std::string& sec, const std::string& key) const {
    if (auto p = std::get_if<TomlArray>(&v.v)) return *p;
    type_error(sec, key, "an array");
  }

  void get(const std::string& sec, const std::string& key, double& out) {
    if (auto v = find(sec, key)) out = num(*v, sec, key);
  }
  void get(const std::string& sec, const std::string& key, std::optional<double>& out) {
    if (auto v = find(sec, key)) out = num(*v, sec, key);
  }
  void get(const std::string& sec, const std::string& key, std::size_t& out) {
    if (auto v = find(sec, key)) out = count(*v, sec, key);
  }
  void get(const std::string& sec, const std::string& key, std::optional<std::size_t>& out) {
    if (auto v = find(sec, key)) out = count(*v, sec, key);
  }
  void get(const std::string& sec, const std::string& key, unsigned long long& out) {
    if (auto v = find(sec, key)) out = count(*v, sec, key);
  }
  void get(const std::string& sec, const std::string& key, std::string& out) {
    if (auto v = find(sec, key)) out = str(*v, sec, key);
  }
  template <class E>
  void get_list(const std::string& sec, const std::string& key, std::vector<E>& out) {
    auto v = find(sec, key);
    if (!v) return;
    out.clear();
    for (const auto& e : arr(*v, sec, key)) {
      if constexpr (std::is_same_v<E, std::string>) {
        out.push_back(str(e, sec, key));
      } else if constexpr (std::is_same_v<E, double>) {
        out.push_back(num(e, sec, key));
      } else {
        out.push_back(static_cast<E>(count(e, sec, key)));
      }
    }
  }
};

}  // namespace detail

/// Builds a RunConfig from parsed TOML. Relative data paths resolve against
/// `base_dir` (the directory holding the config file).
inline RunConfig run_config_from_toml(const TomlTable& t, const std::string& path = "<config>",
                                      const std::string& base_dir = "") {
  RunConfig c;
  detail::TomlReader r{t, path, {}};
  r.get("data", "lmp", c.lmp_path);
  r.get("data", "demand", c.demand_path);
  r.get("data", "lmp_format", c.lmp_format);
  r.get("data", "node", c.node);
  r.get("data", "hours", c.horizon);
  r.get("game", "a", c.a);
  r.get("game", "q_rule", c.q_rule);
  r.get("game", "u_scale", c.u_scale);
  r.get("game", "u", c.u);
  r.get("game", "p_max", c.p_max);
  r.get("game", "buildings", c.buildings);
  r.get("learner", "samples", c.samples);
  r.get("learner", "forgetting", c.forgetting);
  r.get("learner", "pi0_scale", c.pi0_scale);
  r.get("learner", "change_tol", c.change_tol);
  r.get("learner", "pe_window", c.pe_window);
  r.get("basis", "kind", c.basis);
  r.get("optimizer", "restarts", c.restarts);
  r.get("run", "seed", c.seed);
  r.get("run", "jobs", c.jobs);
  r.get("run", "out", c.out_dir);
  r.get("run", "date", c.date);
  r.get_list("sweep", "a", c.sweep_a);
  r.get_list("sweep", "q_rule", c.sweep_q_rule);
  r.get_list("sweep", "samples", c.sweep_samples);
  r.get_list("sweep", "buildings", c.sweep_buildings);
  r.get_list("sweep", "seeds", c.sweep_seeds);
  r.get_list("sweep", "dates", c.sweep_dates);

  for (const auto& [sec, keys] : t) {
    for (const auto& [key, _] : keys) {
      if (!r.used.count({sec, key})) {
        throw DataError(path + ": unknown key " + (sec.empty() ? "" : "[" + sec + "] ") + key);
      }
    }
  }
  if (c.lmp_format != "plain" && c.lmp_format != "caiso") {
    throw DataError(path + ": [data] lmp_format must be \"plain\" or \"caiso\"");
  }
  QRule::parse(c.q_rule);
  for (const auto& q : c.sweep_q_rule) QRule::parse(q);
  if (!base_dir.empty()) {
    auto resolve = [&](std::string& p) {
      if (!p.empty() && std::filesystem::path(p).is_relative()) p = (std::filesystem::path(base_dir) / p).string();
    };
    resolve(c.lmp_path);
    resolve(c.demand_path);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = std::filesystem::path(path).parent_path().string();
  return run_config_from_toml(parse_toml(ss.str(), path), path, base);
}

namespace detail {
inline std::string toml_str(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}
template <class E, class F>
std::string toml_list(const std::vector<E>& v, F fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out + "]";
}
}  // namespace detail

/// Writes a config that run_config_from_toml reads back unchanged.
inline std::string to_toml(const RunConfig& c) {
  using detail::num;
  using detail::toml_str;
  auto u64 = [](std::uint64_t v) { return std::to_string(v); };
  std::ostringstream o;
  o << "[data]\n";
  o << "lmp = " << toml_str(c.lmp_path) << "\n";
  o << "demand = " << toml_str(c.demand_path) << "\n";
  o << "lmp_format = " << toml_str(c.lmp_format) << "\n";
  if (!c.node.empty()) o << "node = " << toml_str(c.node) << "\n";
  o << "hours = " << c.horizon << "\n\n";
  o << "[game]\n";
  o << "a = " << num(c.a) << "\n";
  o << "q_rule = " << toml_str(c.q_rule) << "\n";
  o << "u_scale = " << num(c.u_scale) << "\n";
  if (c.u) o << "u = " << num(*c.u) << "\n";
  if (c.p_max) o << "p_max = " << num(*c.p_max) << "\n";
  o << "buildings = " << c.buildings << "\n\n";
  o << "[learner]\n";
  o << "samples = " << c.samples << "\n";
  o << "forgetting = " << num(c.forgetting) << "\n";
  o << "pi0_scale = " << num(c.pi0_scale) << "\n";
  if (c.change_tol) o << "change_tol = " << num(*c.change_tol) << "\n";
  if (c.pe_window) o << "pe_window = " << *c.pe_window << "\n";
  o << "\n[basis]\nkind = " << toml_str(c.basis) << "\n\n";
  o << "[optimizer]\nrestarts = " << c.restarts << "\n\n";
  o << "[run]\n";
  o << "seed = " << c.seed << "\n";
  o << "jobs = " << c.jobs << "\n";
  o << "out = " << toml_str(c.out_dir) << "\n";
  if (!c.date.empty()) o << "date = " << toml_str(c.date) << "\n";
  const bool sweep = !c.sweep_a.empty() || !c.sweep_q_rule.empty() || !c.sweep_samples.empty() ||
                     !c.sweep_buildings.empty() || !c.sweep_seeds.empty() || !c.sweep_dates.empty();
  if (sweep) {
    o << "\n[sweep]\n";
    if (!c.sweep_a.empty()) o << "a = " << detail::toml_list(c.sweep_a, [](double v) { return num(v); }) << "\n";
    if (!c.sweep_q_rule.empty()) o << "q_rule = " << detail::toml_list(c.sweep_q_rule, toml_str) << "\n";
    auto sz = [](std::size_t v) { return std::to_string(v); };
    if (!c.sweep_samples.empty()) o << "samples = " << detail::toml_list(c.sweep_samples, sz) << "\n";
    if (!c.sweep_buildings.empty()) o << "buildings = " << detail::toml_list(c.sweep_buildings, sz) << "\n";
    if (!c.sweep_seeds.empty()) o << "seeds = " << detail::toml_list(c.sweep_seeds, u64) << "\n";
    if (!c.sweep_dates.empty()) o << "dates = " << detail::toml_list(c.sweep_dates, toml_str) << "\n";
  }
  return o.str();
}

//---------------------------------------------------------------------------//
// From config + data to a game
//---------------------------------------------------------------------------//

inline Dataset load_dataset(const RunConfig& c, std::vector<std::string>* warnings = nullptr) {
  if (c.lmp_path.empty() || c.demand_path.empty()) throw DataError("config needs [data] lmp and demand paths");
  return load_dataset(c.lmp_path, c.demand_path, c.horizon, c.lmp_format == "caiso", c.node, warnings);
}

inline PopulationSpec population_spec(const RunConfig& c) {
  return {c.a, QRule::parse(c.q_rule), c.u_scale, c.u};
}

/// The game for one date: prosumers are the buildings with a schedule that
/// day (first `buildings` in id order when limited).
inline GameConfig build_game(const RunConfig& c, const Dataset& data, const std::string& date) {
  auto it = data.lmp.find(date);
  if (it == data.lmp.end()) throw DataError("no market prices for date " + date);
  auto sched = data.schedules(date);
  if (sched.empty()) throw DataError("no building demand for date " + date);
  if (c.buildings > 0 && c.buildings < sched.size()) sched.resize(c.buildings);
  GameConfig g;
  g.day = MarketDay::make(date, it->second, c.p_max);
  g.prosumers = build_prosumers(sched, g.day.lambda, population_spec(c), derive_seed(c.seed, stable_hash(date)));
  g.sample_budget = c.samples;
  g.forgetting = c.forgetting;
  g.rng_seed = derive_seed(c.seed, stable_hash(date) ^ 0x5EED);
  return g;
}

inline StopRule stop_rule(const RunConfig& c) {
  return c.change_tol ? StopRule::converged(c.samples, *c.change_tol) : StopRule::fixed(c.samples);
}

inline RunOptions run_options(const RunConfig& c) {
  RunOptions o;
  o.restarts = c.restarts;
  o.jobs = c.jobs;
  o.pi0_scale = c.pi0_scale;
  o.pe_window = c.pe_window;
  return o;
}

inline SweepSpec sweep_spec(const RunConfig& c) {
  SweepSpec s;
  s.a_values = c.sweep_a.empty() ? std::vector<double>{c.a} : c.sweep_a;
  s.q_rules.clear();
  for (const auto& q : c.sweep_q_rule.empty() ? std::vector<std::string>{c.q_rule} : c.sweep_q_rule) {
    s.q_rules.push_back(QRule::parse(q));
  }
  s.J_values = c.sweep_samples.empty() ? std::vector<std::size_t>{c.samples} : c.sweep_samples;
  s.N_values = c.sweep_buildings.empty() ? std::vector<std::size_t>{c.buildings} : c.sweep_buildings;
  s.seeds = c.sweep_seeds.empty() ? std::vector<std::uint64_t>{c.seed} : c.sweep_seeds;
  s.dates = c.sweep_dates;
  s.basis = c.basis;
  s.forgetting = c.forgetting;
  s.u_scale = c.u_scale;
  s.u_fixed = c.u;
  s.p_max = c.p_max;
  s.change_tol = c.change_tol;
  s.run = run_options(c);
  return s;
}

}  // namespace dragg::io

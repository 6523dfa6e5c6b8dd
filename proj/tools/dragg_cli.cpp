// dragg: command-line driver.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 solver/learner failure.

#include "dragg/dragg.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dragg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  std::optional<std::size_t> samples;
  std::optional<double> a;
  std::string q_rule;
  std::string basis;
  std::optional<std::size_t> restarts;
  std::string date;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Run configuration file (TOML subset)");
  sub->add_option("--seed", f.seed, "Base RNG seed");
  sub->add_option("--jobs", f.jobs, "Worker threads (0 = all cores)");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--samples", f.samples, "Sample budget J");
  sub->add_option("--a", f.a, "Flexibility multiplier a >= 1");
  sub->add_option("--q-rule", f.q_rule, "Q rule: zero | absolute:<kWh> | fraction:<f> | uniform:<q>");
  sub->add_option("--basis", f.basis,
                  "Feature basis: affine | quadratic-diagonal | polynomial-diagonal:<D> | random-fourier[:<R>]");
  sub->add_option("--restarts", f.restarts, "Optimizer restarts");
  sub->add_option("--date", f.date, "Market day (YYYY-MM-DD)");
}

io::RunConfig resolve(const Flags& f) {
  io::RunConfig c;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw DataError("config file not found: " + f.config);
    c = io::load_run_config(f.config);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.samples) c.samples = *f.samples;
  if (f.a) c.a = *f.a;
  if (!f.q_rule.empty()) {
    QRule::parse(f.q_rule);
    c.q_rule = f.q_rule;
  }
  if (!f.basis.empty()) c.basis = f.basis;
  if (f.restarts) c.restarts = *f.restarts;
  if (!f.date.empty()) c.date = f.date;
  return c;
}

std::string pick_date(const io::RunConfig& c, const Dataset& d) {
  if (!c.date.empty()) return c.date;
  if (d.lmp.empty()) throw DataError("no market days in the data");
  return d.lmp.begin()->first;
}

Dataset load_data(const io::RunConfig& c) {
  std::vector<std::string> warnings;
  Dataset d = io::load_dataset(c, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return d;
}

int cmd_synth(const Flags& f, std::size_t buildings, std::size_t days, std::size_t hours, const std::string& start) {
  io::RunConfig c = resolve(f);
  const std::string out = f.out.empty() ? std::string("data") : f.out;
  fs::create_directories(out);
  const Dataset d = io::synth_generate(c.seed, buildings, hours, days, start);
  io::save_lmp((fs::path(out) / "lmp.csv").string(), d.lmp);
  io::save_demand((fs::path(out) / "demand.csv").string(), d.demand);
  c.lmp_path = "lmp.csv";
  c.demand_path = "demand.csv";
  c.horizon = hours;
  // --out names the data directory here; results go to the config's own out.
  c.out_dir = f.config.empty() ? std::string("out") : io::load_run_config(f.config).out_dir;
  // Prices are a few cents per kWh, so a weak prior needs a large Pi0.
  if (f.config.empty()) c.pi0_scale = 1e6;
  std::ofstream((fs::path(out) / "run.toml").string()) << io::to_toml(c);
  std::cout << "wrote " << (fs::path(out) / "lmp.csv").string() << ", " << (fs::path(out) / "demand.csv").string()
            << ", " << (fs::path(out) / "run.toml").string() << '\n';
  return kOk;
}

int cmd_validate(const Flags& f) {
  const io::RunConfig c = resolve(f);
  const Dataset d = load_data(c);
  const std::vector<std::string> dates = c.date.empty() ? d.dates() : std::vector<std::string>{c.date};
  std::size_t bad = 0;
  for (const auto& date : dates) {
    const GameConfig g = io::build_game(c, d, date);
    const FeatureBasis basis = make_basis(c.basis, g.horizon(), g.day.p_max, c.seed);
    for (const auto& v : validate_config(g, basis.feature_count())) {
      std::cout << date << ' ' << v.field << ": " << v.rule << '\n';
      ++bad;
    }
  }
  if (bad) {
    std::cerr << bad << " violation(s)\n";
    return kData;
  }
  std::cout << "ok: " << dates.size() << " day(s) valid\n";
  return kOk;
}

int cmd_learn(const Flags& f) {
  const io::RunConfig c = resolve(f);
  const Dataset d = load_data(c);
  const std::string date = pick_date(c, d);
  const GameConfig g = io::build_game(c, d, date);
  const FeatureBasis basis = make_basis(c.basis, g.horizon(), g.day.p_max, c.seed);
  if (const auto v = validate_config(g, basis.feature_count()); !v.empty()) {
    for (const auto& e : v) std::cerr << e.field << ": " << e.rule << '\n';
    return kData;
  }
  const RunOptions opt = io::run_options(c);
  const LearnOutcome lo = learn_and_price(population_responder(g.prosumers, c.jobs), basis, g.day,
                                          g.baseline_demand(), g.forgetting, io::stop_rule(c), g.rng_seed, opt);
  fs::create_directories(c.out_dir);
  const auto csv = fs::path(c.out_dir) / ("samples_" + date + ".csv");
  {
    std::ofstream os(csv);
    if (!os) throw DataError("cannot write '" + csv.string() + "'");
    write_sample_log_csv(os, lo.learner.log);
  }
  const std::size_t M = c.pe_window.value_or(2 * basis.feature_count());
  PEReport pe;
  pe.window = M;
  if (lo.learner.log.size() > M) pe = pe_check(lo.learner.log, M);
  io::Json j = io::Json::object();
  j["date"] = date;
  j["basis"] = to_string(basis.kind());
  j["samples_used"] = lo.learner.j;
  j["forgetting"] = lo.learner.m;
  j["pe"] = io::to_json(pe);
  j["theta"] = io::detail::matrix(lo.learner.theta);
  j["pi"] = io::detail::matrix(lo.learner.pi);
  const auto js = fs::path(c.out_dir) / ("learner_" + date + ".json");
  io::write_json_file(js.string(), j);
  std::cout << "learned " << lo.learner.j << " samples; wrote " << csv.string() << ", " << js.string() << '\n';
  return kOk;
}

int cmd_solve_day(const Flags& f) {
  const io::RunConfig c = resolve(f);
  const Dataset d = load_data(c);
  const std::string date = pick_date(c, d);
  const GameConfig g = io::build_game(c, d, date);
  const FeatureBasis basis = make_basis(c.basis, g.horizon(), g.day.p_max, c.seed);
  const DayResult r = run_day(g, basis, io::stop_rule(c), io::run_options(c));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  fs::create_directories(c.out_dir);
  const auto js = fs::path(c.out_dir) / ("day_" + date + ".json");
  io::write_json_file(js.string(), io::to_json(r));
  const auto charts = io::emit_charts({r}, (fs::path(c.out_dir) / "charts").string());
  std::cout << "wrote " << js.string();
  for (const auto& p : charts) std::cout << ", " << p;
  std::cout << '\n';
  return kOk;
}

int cmd_bounds(const std::string& day_path) {
  if (day_path.empty()) throw CLI::RequiredError("--day");
  const io::Json day = io::read_json_file(day_path);
  const BoundReport r = io::bound_report_from_day_json(day);
  std::cout << io::to_json(r).dump(2) << '\n';
  return kOk;
}

int cmd_sweep(const Flags& f) {
  const io::RunConfig c = resolve(f);
  const Dataset d = load_data(c);
  SweepSpec spec = io::sweep_spec(c);
  if (!f.date.empty()) spec.dates = {f.date};
  if (f.samples) spec.J_values = {*f.samples};
  if (f.a) spec.a_values = {*f.a};
  if (!f.q_rule.empty()) spec.q_rules = {QRule::parse(f.q_rule)};
  if (f.seed) spec.seeds = {*f.seed};
  const auto rows = run_sweep(spec, d);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") {
      ++failed;
      std::cerr << "cell " << r.date << " a=" << r.a << ' ' << r.q_rule << " J=" << r.J << " seed=" << r.seed << ": "
                << r.status << '\n';
    }
  }
  fs::create_directories(c.out_dir);
  const auto csv = fs::path(c.out_dir) / "sweep_summary.csv";
  io::write_sweep_csv(csv.string(), rows);
  std::cout << "wrote " << csv.string();
  if (failed < rows.size()) {
    for (const auto& p : io::emit_charts(rows, (fs::path(c.out_dir) / "charts").string())) std::cout << ", " << p;
  }
  std::cout << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online learning of epsilon-Stackelberg prices for a demand-response aggregator", "dragg"};
  app.require_subcommand(1);

  Flags f;
  std::size_t buildings = 71, days = 1, hours = kDefaultHorizon;
  std::string start = "2022-05-01", day_path;

  auto* synth = app.add_subcommand("synth", "Generate synthetic price and demand files plus a run.toml");
  add_common(synth, f);
  synth->add_option("--buildings", buildings, "Number of buildings")->capture_default_str();
  synth->add_option("--days", days, "Number of consecutive days")->capture_default_str();
  synth->add_option("--hours", hours, "Hours per day T")->capture_default_str();
  synth->add_option("--start", start, "First date")->capture_default_str();

  auto* learn = app.add_subcommand("learn", "Run the online learner for one day and export the sample log");
  add_common(learn, f);
  auto* solve = app.add_subcommand("solve-day", "Learn, price and evaluate one market day");
  add_common(solve, f);
  auto* bounds = app.add_subcommand("bounds", "Recompute the bound report stored in a day JSON");
  add_common(bounds, f);
  bounds->add_option("--day", day_path, "day_<date>.json written by solve-day");
  auto* sweep = app.add_subcommand("sweep", "Run the parameter sweep from the [sweep] section");
  add_common(sweep, f);
  auto* validate = app.add_subcommand("validate", "Check the configuration and data against the model invariants");
  add_common(validate, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(f, buildings, days, hours, start);
    if (*learn) return cmd_learn(f);
    if (*solve) return cmd_solve_day(f);
    if (*bounds) return cmd_bounds(day_path);
    if (*sweep) return cmd_sweep(f);
    if (*validate) return cmd_validate(f);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const InfeasibleError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}

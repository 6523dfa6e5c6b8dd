#pragma once

// End-to-end driver for one market day: sample prices, query prosumers,
// learn d*(p) online, price against the surrogate, and evaluate the outcome.
// Also the sweep harness over days and parameter grids.

#include "dragg/aggregator.hpp"
#include "dragg/basis.hpp"
#include "dragg/bounds.hpp"
#include "dragg/core.hpp"
#include "dragg/learning.hpp"
#include "dragg/prosumer.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dragg {

inline constexpr double kCo2LbsPerKwh = 0.85;

/// Anything that maps a price vector to the cumulative demand d*(p).
using Responder = std::function<Vector(const Vector&)>;

/// N prosumers answered independently (optionally in parallel); the hourly
/// sum is taken afterwards in index order so the result does not depend on
/// the thread count.
inline Responder population_responder(const std::vector<ProsumerProfile>& prosumers, std::size_t jobs = 1) {
  return [&prosumers, jobs](const Vector& p) {
    std::vector<Vector> xs(prosumers.size());
    parallel_for(prosumers.size(), jobs, [&](std::size_t i) { xs[i] = best_response(prosumers[i], p).x.values(); });
    Vector d = Vector::Zero(p.size());
    for (const auto& x : xs) d += x;
    return d;
  };
}

/// The same population seen as one opaque responder.
inline Responder aggregate_responder(const std::vector<ProsumerProfile>& prosumers) {
  return [&prosumers](const Vector& p) { return total_response(prosumers, p); };
}

struct RunOptions {
  std::size_t restarts = 16;
  std::size_t jobs = 1;
  double pi0_scale = 10.0;
  std::optional<std::size_t> pe_window;  // default 2K
  std::size_t holdout = 0;               // default 2K
  std::size_t lipschitz_pairs = 100;
  std::size_t curvature_directions = 16;
  bool bounds = true;
};

struct LearnOutcome {
  LearnerState learner;
  PriceSolution solution;
};

/// The learning stage: J sampled prices, RLS on the responses, then the
/// surrogate maximization. Streams: 1 for prices, 2 for the optimizer.
inline LearnOutcome learn_and_price(const Responder& respond, const FeatureBasis& basis, const MarketDay& day,
                                    const DemandVector& d0, double m, const StopRule& stop, std::uint64_t seed,
                                    const RunOptions& opt = {}) {
  const std::size_t T = day.horizon();
  const std::size_t K = basis.feature_count();
  if (basis.horizon() != T) throw DomainError("basis horizon differs from market day");

  LearnOutcome out{LearnerState::init(K, T, m, opt.pi0_scale), {}};
  StopRule rule = stop;
  rule.min_samples = std::max(rule.min_samples, K);
  StopMonitor monitor(rule);
  std::mt19937_64 rng(derive_seed(seed, 1));
  while (out.learner.j < rule.max_samples) {
    const Vector p = sample_price(rng, T, day.p_max);
    const Vector d = respond(p);
    rls_step(out.learner, basis.eval(p), d, &p);
    if (monitor.update(out.learner)) break;
  }

  AscentOptions aopt;
  aopt.restarts = opt.restarts;
  aopt.seed = derive_seed(seed, 2);
  aopt.jobs = opt.jobs;
  out.solution = maximize_price(Surrogate(out.learner.theta, basis, d0.values(), day.lambda.values()), day.p_max, aopt);
  return out;
}

struct DayResult {
  std::string date;
  PriceVector lambda;
  double p_max = 0.0;
  PriceVector p_eps;
  DemandVector d0;
  std::vector<std::string> prosumer_ids;
  std::vector<DemandVector> x_eps;
  DemandVector bid_delta;      // d0 - Theta^T phi(p_eps), submitted with lambda
  DemandVector true_delta;     // d0 - sum_i x_i*(p_eps)
  DemandVector learned_demand; // Theta^T phi(p_eps)
  double g_a_surrogate = 0.0;
  double g_a_true = 0.0;
  std::vector<double> g_p;
  std::size_t samples_used = 0;
  double total_saved_kwh = 0.0;  // sum_i Q_i
  double co2_savings_lbs = 0.0;
  std::vector<double> innovation_norms;
  std::vector<double> restart_values;
  bool optimizer_converged = false;
  PEReport pe;
  std::optional<BoundReport> bound_report;
  std::vector<std::string> warnings;
  Matrix theta;
  std::string basis_kind;
};

inline double co2_savings(double kwh_saved) { return kCo2LbsPerKwh * kwh_saved; }

inline double co2_savings(const std::vector<DayResult>& days) {
  double kwh = 0.0;
  for (const auto& d : days) kwh += d.total_saved_kwh;
  return co2_savings(kwh);
}

struct PlayerUtilities {
  std::vector<double> g_p;
  double g_a_true = 0.0;
  double g_a_surrogate = 0.0;
  double gap = 0.0;  // g_a_surrogate - g_a_true
};

/// Utilities at (x_eps, p_eps): each prosumer's payoff, and the aggregator's
/// payoff both under the learned surrogate and under the exact responses.
inline PlayerUtilities player_utilities(const DayResult& r, const std::vector<ProsumerProfile>& prosumers,
                                        const PriceVector& lambda) {
  if (r.x_eps.size() != prosumers.size()) throw DomainError("player_utilities: prosumer count mismatch");
  PlayerUtilities u;
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    u.g_p.push_back(prosumer_utility(prosumers[i], r.x_eps[i], r.p_eps));
  }
  u.g_a_true = true_payoff(r.p_eps, prosumers, lambda);
  u.g_a_surrogate = (lambda.values() - r.p_eps.values()).dot(r.bid_delta.values());
  u.gap = u.g_a_surrogate - u.g_a_true;
  return u;
}

namespace detail {

inline std::vector<std::pair<Vector, Vector>> draw_holdout(const Responder& respond, std::size_t n, std::size_t T,
                                                           double p_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Vector, Vector>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector p = sample_price(rng, T, p_max);
    Vector d = respond(p);
    out.emplace_back(std::move(p), std::move(d));
  }
  return out;
}

}  // namespace detail

/// Collects the inputs of the bound calculators for a finished day and tags
/// each one as certified (closed form) or estimate (measured from samples).
inline BoundInputs assemble_bound_inputs(const LearnerState& learner, const FeatureBasis& basis, const MarketDay& day,
                                         const DemandVector& d0, const std::vector<ProsumerProfile>& prosumers,
                                         const ErrorEstimates& est, const PEReport& pe, double pi0_scale,
                                         std::uint64_t seed, std::size_t lipschitz_pairs) {
  BoundInputs in;
  const auto c = basis.certify_constants();
  in.T = day.horizon();
  in.lambda_max = day.lambda_max();
  in.p_max = day.p_max;
  in.phi_max = c.phi_max;
  in.L_phi = c.L_phi;
  in.L_dphi = c.L_dphi;
  in.theta_max = est.theta_max;
  in.theta_r_max = est.theta_r_max;
  in.eps_m_max = est.eps_m_max;
  in.delta = est.delta;
  in.m = learner.m;
  in.M = pe.window;
  in.beta0 = pe.beta0;
  in.beta1 = pe.beta1;
  in.lambda_max_pi0_inv = 1.0 / pi0_scale;
  in.d0_norm = d0.values().norm();
  for (std::size_t i = 0; i < prosumers.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, 100 + i));
    in.L_i_hat.push_back(estimate_response_lipschitz(prosumers[i], day.p_max, lipschitz_pairs, rng));
    in.L_pi.push_back(utility_lipschitz(prosumers[i], day.p_max));
  }
  for (const char* k : {"T", "lambda_max", "p_max", "phi_max", "L_phi", "L_dphi", "m", "M", "lambda_max_Pi0inv",
                        "d0_norm", "L_pi"}) {
    in.provenance[k] = Provenance::certified;
  }
  for (const char* k : {"theta_max", "theta_r_max", "eps_m_max", "delta", "beta0", "beta1", "L_i_hat"}) {
    in.provenance[k] = Provenance::estimate;
  }
  return in;
}

/// Learns, prices and evaluates one market day with the prosumers of `cfg`.
inline DayResult run_day(const GameConfig& cfg, const FeatureBasis& basis, const StopRule& stop,
                         const RunOptions& opt = {}) {
  if (const auto v = validate_config(cfg, basis.feature_count()); !v.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : v) msg += " [" + e.field + ": " + e.rule + "]";
    throw DomainError(msg);
  }
  const std::size_t T = cfg.horizon();
  const std::size_t K = basis.feature_count();
  const DemandVector d0 = cfg.baseline_demand();
  const Responder respond = population_responder(cfg.prosumers, opt.jobs);

  LearnOutcome lo = learn_and_price(respond, basis, cfg.day, d0, cfg.forgetting, stop, cfg.rng_seed, opt);
  const Vector& p = lo.solution.p_eps.values();

  DayResult r;
  r.date = cfg.day.date;
  r.lambda = cfg.day.lambda;
  r.p_max = cfg.day.p_max;
  r.p_eps = lo.solution.p_eps;
  r.d0 = d0;
  r.samples_used = lo.learner.j;
  r.theta = lo.learner.theta;
  r.basis_kind = to_string(basis.kind());
  r.restart_values = lo.solution.restart_values;
  r.optimizer_converged = lo.solution.converged;

  std::vector<BestResponse> brs(cfg.prosumers.size());
  parallel_for(cfg.prosumers.size(), opt.jobs, [&](std::size_t i) { brs[i] = best_response(cfg.prosumers[i], p); });
  Vector total = Vector::Zero(static_cast<Eigen::Index>(T));
  for (std::size_t i = 0; i < brs.size(); ++i) {
    const auto& pr = cfg.prosumers[i];
    if (const auto bad = check_response(pr, brs[i].x.values(), 1e-9 * std::max(1.0, pr.W)); !bad.empty()) {
      throw SolverError("prosumer '" + pr.id + "' response failed re-validation: " + bad);
    }
    r.prosumer_ids.push_back(pr.id);
    r.x_eps.push_back(brs[i].x);
    r.g_p.push_back(brs[i].utility);
    r.total_saved_kwh += pr.Q();
    total += brs[i].x.values();
  }
  const Vector learned = lo.learner.theta.transpose() * basis.eval(p);
  r.learned_demand = DemandVector(learned);
  r.bid_delta = DemandVector(d0.values() - learned);
  r.true_delta = DemandVector(d0.values() - total);
  r.g_a_surrogate = lo.solution.surrogate_value;
  r.g_a_true = (cfg.day.lambda.values() - p).dot(r.true_delta.values());
  r.co2_savings_lbs = co2_savings(r.total_saved_kwh);
  for (const auto& s : lo.learner.log) r.innovation_norms.push_back(s.innovation_norm);

  const std::size_t M = opt.pe_window.value_or(2 * K);
  if (lo.learner.log.size() >= M + 1) {
    r.pe = pe_check(lo.learner.log, M);
  } else {
    r.pe.window = M;
  }
  if (!r.pe.satisfied) r.warnings.emplace_back("persistent excitation not observed over window M=" + std::to_string(M));

  if (opt.bounds) {
    const std::size_t H = opt.holdout ? opt.holdout : 2 * K;
    const auto holdout = detail::draw_holdout(respond, H, T, cfg.day.p_max, derive_seed(cfg.rng_seed, 3));
    const Surrogate g(lo.learner.theta, basis, d0.values(), cfg.day.lambda.values());
    const ErrorEstimates est = estimate_error_inputs(lo.learner, basis, holdout, &g, &p,
                                                     derive_seed(cfg.rng_seed, 4), opt.curvature_directions);
    const BoundInputs in = assemble_bound_inputs(lo.learner, basis, cfg.day, d0, cfg.prosumers, est, r.pe,
                                                 opt.pi0_scale, derive_seed(cfg.rng_seed, 5), opt.lipschitz_pairs);
    r.bound_report = compute_bound_report(in, r.g_a_surrogate, r.g_p);
    for (const auto& d : r.bound_report->diagnostics) r.warnings.push_back(d);
  }
  return r;
}

//---------------------------------------------------------------------------//
// Population construction
//---------------------------------------------------------------------------//

/// Inelasticity calibration: shifting 5% of a building's peak hourly demand
/// costs as much in inconvenience as it earns at the median hourly price,
/// u (0.05 peak)^2 = median(lambda) 0.05 peak. `u_scale` rescales the result.
inline double calibrate_u(const DemandVector& schedule, const PriceVector& lambda, double u_scale = 1.0) {
  const double peak = schedule.max();
  if (!(peak > 0.0)) throw DomainError("calibrate_u: schedule has no positive hour");
  std::vector<double> l(lambda.values().data(), lambda.values().data() + lambda.size());
  return u_scale * median(std::move(l)) / (0.05 * peak);
}

struct PopulationSpec {
  double a = 2.0;
  QRule q_rule = QRule::fraction(0.01);
  double u_scale = 1.0;
  std::optional<double> u_fixed;
};

/// Builds prosumer profiles from schedules; stochastic Q rules draw from a
/// stream derived from `seed`.
inline std::vector<ProsumerProfile> build_prosumers(const std::vector<std::pair<std::string, DemandVector>>& schedules,
                                                    const PriceVector& lambda, const PopulationSpec& spec,
                                                    std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 7));
  std::vector<ProsumerProfile> out;
  out.reserve(schedules.size());
  for (const auto& [id, x0] : schedules) {
    ProsumerProfile p;
    p.id = id;
    p.schedule = x0;
    p.a = spec.a;
    p.u = spec.u_fixed ? *spec.u_fixed : calibrate_u(x0, lambda, spec.u_scale);
    p.W = spec.q_rule.target(x0.sum(), rng);
    out.push_back(std::move(p));
  }
  return out;
}

/// Net demand after N_agg identical aggregators each deliver Delta d.
inline Vector duck_curve_replica(const Vector& net_demand, const DemandVector& delta, double n_agg) {
  if (net_demand.size() != static_cast<Eigen::Index>(delta.size())) throw DomainError("duck curve: length mismatch");
  return net_demand - n_agg * delta.values();
}

//---------------------------------------------------------------------------//
// Sweeps
//---------------------------------------------------------------------------//

/// Day-indexed input data: market prices and per-building schedules.
struct Dataset {
  std::map<std::string, PriceVector> lmp;
  std::map<std::string, std::map<std::string, DemandVector>> demand;  // building -> date -> x0

  std::vector<std::string> dates() const {
    std::vector<std::string> out;
    for (const auto& [d, _] : lmp) out.push_back(d);
    return out;
  }

  /// Buildings with a schedule on `date`, in id order.
  std::vector<std::pair<std::string, DemandVector>> schedules(const std::string& date) const {
    std::vector<std::pair<std::string, DemandVector>> out;
    for (const auto& [b, days] : demand) {
      if (auto it = days.find(date); it != days.end()) out.emplace_back(b, it->second);
    }
    return out;
  }
};

struct SweepSpec {
  std::vector<double> a_values{2.0};
  std::vector<QRule> q_rules{QRule::fraction(0.01)};
  std::vector<std::size_t> J_values{100};
  std::vector<std::size_t> N_values{0};  // 0 = all buildings
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> dates;        // empty = every date in the data
  std::string basis = "affine";
  double forgetting = 0.98;
  double u_scale = 1.0;
  std::optional<double> u_fixed;
  std::optional<double> p_max;
  std::optional<double> change_tol;
  RunOptions run;

  std::size_t cells() const {
    return a_values.size() * q_rules.size() * J_values.size() * N_values.size() * seeds.size();
  }
};

struct SweepRow {
  std::string date;  // YYYY-MM-DD, or YYYY-MM for a monthly mean
  bool monthly_mean = false;
  std::size_t days = 1;
  double a = 0.0;
  std::string q_rule;
  std::size_t J = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::size_t samples_used = 0;
  double g_a_surrogate = 0.0;
  double g_a_true = 0.0;
  double gap = 0.0;
  double g_p_mean = 0.0;
  double g_p_min = 0.0;
  double demand_final = 0.0;
  double saved_kwh = 0.0;
  double co2_lbs = 0.0;
  double p_eps_mean = 0.0;
  double restart_spread = 0.0;  // max - min restart value
};

/// Builds the basis named in a sweep or config.
inline FeatureBasis make_basis(const std::string& spec, std::size_t T, double p_max, std::uint64_t seed) {
  if (spec == "affine") return FeatureBasis::affine(T, p_max);
  if (spec == "quadratic-diagonal") return FeatureBasis::quadratic_diagonal(T, p_max);
  if (spec.rfind("polynomial-diagonal:", 0) == 0) {
    return FeatureBasis::polynomial(T, p_max, std::stoi(spec.substr(20)));
  }
  if (spec.rfind("random-fourier", 0) == 0) {
    std::size_t R = 2 * T;
    if (spec.size() > 14) {
      if (spec[14] != ':') throw DataError("bad basis '" + spec + "'");
      R = static_cast<std::size_t>(std::stoul(spec.substr(15)));
    }
    return FeatureBasis::random_fourier(T, p_max, R, derive_seed(seed, 9));
  }
  throw DataError("unknown basis '" + spec + "'");
}

namespace detail {

inline SweepRow summarize(const DayResult& r) {
  SweepRow row;
  row.date = r.date;
  row.samples_used = r.samples_used;
  row.g_a_surrogate = r.g_a_surrogate;
  row.g_a_true = r.g_a_true;
  row.gap = r.g_a_surrogate - r.g_a_true;
  double s = 0.0, mn = std::numeric_limits<double>::infinity();
  for (double g : r.g_p) {
    s += g;
    mn = std::min(mn, g);
  }
  row.g_p_mean = r.g_p.empty() ? 0.0 : s / static_cast<double>(r.g_p.size());
  row.g_p_min = r.g_p.empty() ? 0.0 : mn;
  row.demand_final = r.d0.sum() - r.true_delta.sum();
  row.saved_kwh = r.total_saved_kwh;
  row.co2_lbs = r.co2_savings_lbs;
  row.p_eps_mean = r.p_eps.size() ? r.p_eps.sum() / static_cast<double>(r.p_eps.size()) : 0.0;
  if (!r.restart_values.empty()) {
    const auto [lo, hi] = std::minmax_element(r.restart_values.begin(), r.restart_values.end());
    row.restart_spread = *hi - *lo;
  }
  return row;
}

}  // namespace detail

/// Runs every (a, Q-rule, J, N, seed, date) combination. Failed cells are
/// recorded with their error and the sweep continues. When a cell covers
/// more than one day of a month, a monthly-mean row follows that month.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec, const Dataset& data) {
  if (spec.cells() == 0) throw DomainError("sweep grid is empty");
  const std::vector<std::string> dates = spec.dates.empty() ? data.dates() : spec.dates;
  if (dates.empty()) throw DataError("sweep: no market days in the data");

  struct Job {
    double a;
    const QRule* q;
    std::size_t J, N;
    std::uint64_t seed;
    std::string date;
  };
  std::vector<Job> jobs;
  for (double a : spec.a_values)
    for (const auto& q : spec.q_rules)
      for (std::size_t J : spec.J_values)
        for (std::size_t N : spec.N_values)
          for (std::uint64_t seed : spec.seeds)
            for (const auto& date : dates) jobs.push_back({a, &q, J, N, seed, date});

  std::vector<SweepRow> rows(jobs.size());
  RunOptions ropt = spec.run;
  ropt.jobs = 1;
  parallel_for(jobs.size(), spec.run.jobs, [&](std::size_t k) {
    const Job& jb = jobs[k];
    SweepRow row;
    try {
      auto it = data.lmp.find(jb.date);
      if (it == data.lmp.end()) throw DataError("no prices for " + jb.date);
      auto sched = data.schedules(jb.date);
      if (sched.empty()) throw DataError("no demand for " + jb.date);
      if (jb.N > 0 && jb.N < sched.size()) sched.resize(jb.N);
      GameConfig cfg;
      cfg.day = MarketDay::make(jb.date, it->second, spec.p_max);
      cfg.prosumers = build_prosumers(sched, cfg.day.lambda, {jb.a, *jb.q, spec.u_scale, spec.u_fixed},
                                      derive_seed(jb.seed, stable_hash(jb.date)));
      cfg.sample_budget = jb.J;
      cfg.forgetting = spec.forgetting;
      cfg.rng_seed = derive_seed(jb.seed, stable_hash(jb.date) ^ 0x5EED);
      const FeatureBasis basis = make_basis(spec.basis, cfg.horizon(), cfg.day.p_max, jb.seed);
      const StopRule stop = spec.change_tol ? StopRule::converged(jb.J, *spec.change_tol) : StopRule::fixed(jb.J);
      row = detail::summarize(run_day(cfg, basis, stop, ropt));
      row.N = cfg.prosumers.size();
    } catch (const std::exception& e) {
      row = SweepRow{};
      row.date = jb.date;
      row.status = std::string("error: ") + e.what();
    }
    row.a = jb.a;
    row.q_rule = jb.q->label();
    row.J = jb.J;
    if (row.N == 0) row.N = jb.N;
    row.seed = jb.seed;
    rows[k] = std::move(row);
  });

  // Monthly means per cell over its successful days, inserted after the last
  // day of each month; a month with fewer than two good days gets none.
  std::vector<SweepRow> out;
  std::size_t k = 0;
  while (k < rows.size()) {
    const std::size_t begin = k;
    while (k < rows.size() && rows[k].a == rows[begin].a && rows[k].q_rule == rows[begin].q_rule &&
           rows[k].J == rows[begin].J && rows[k].seed == rows[begin].seed &&
           jobs[k].N == jobs[begin].N && rows[k].date.substr(0, 7) == rows[begin].date.substr(0, 7)) {
      out.push_back(rows[k]);
      ++k;
    }
    SweepRow mean;
    std::size_t ok = 0;
    for (std::size_t i = begin; i < k; ++i) {
      const auto& r = rows[i];
      if (r.status != "ok") continue;
      ++ok;
      mean.samples_used += r.samples_used;
      mean.g_a_surrogate += r.g_a_surrogate;
      mean.g_a_true += r.g_a_true;
      mean.gap += r.gap;
      mean.g_p_mean += r.g_p_mean;
      mean.g_p_min += r.g_p_min;
      mean.demand_final += r.demand_final;
      mean.saved_kwh += r.saved_kwh;
      mean.co2_lbs += r.co2_lbs;
      mean.p_eps_mean += r.p_eps_mean;
      mean.restart_spread += r.restart_spread;
    }
    if (ok > 1) {
      const double n = static_cast<double>(ok);
      mean.date = rows[begin].date.substr(0, 7);
      mean.monthly_mean = true;
      mean.days = ok;
      mean.a = rows[begin].a;
      mean.q_rule = rows[begin].q_rule;
      mean.J = rows[begin].J;
      mean.N = rows[begin].N;
      mean.seed = rows[begin].seed;
      mean.samples_used = static_cast<std::size_t>(std::llround(static_cast<double>(mean.samples_used) / n));
      for (double* f : {&mean.g_a_surrogate, &mean.g_a_true, &mean.gap, &mean.g_p_mean, &mean.g_p_min,
                        &mean.demand_final, &mean.p_eps_mean, &mean.restart_spread}) {
        *f /= n;
      }
      out.push_back(std::move(mean));
    }
  }
  return out;
}

}  // namespace dragg

#pragma once

// Domain types shared by every module: hourly vectors with units, market
// days, prosumer profiles, game configuration, and their validation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace dragg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr std::size_t kDefaultHorizon = 24;

//---------------------------------------------------------------------------//
// Errors. The CLI maps these onto exit codes.
//---------------------------------------------------------------------------//

/// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Prosumer budget W cannot be met inside the hourly box.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, configs).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a solver or the learner.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Units
//---------------------------------------------------------------------------//

struct PriceTag {
  static constexpr const char* unit = "$/kWh";
  static constexpr bool non_negative = true;
};
struct EnergyTag {
  static constexpr const char* unit = "kWh";
  static constexpr bool non_negative = false;
};

/// A length-T hourly vector carrying its unit in the type. Entries are
/// finite; price vectors are additionally non-negative.
template <class Tag>
class Hourly {
 public:
  Hourly() = default;

  explicit Hourly(Vector values) : values_(std::move(values)) {
    for (Eigen::Index t = 0; t < values_.size(); ++t) {
      if (!std::isfinite(values_[t])) {
        throw DomainError(std::string("non-finite entry in ") + Tag::unit +
                          " vector at hour " + std::to_string(t + 1));
      }
      if constexpr (Tag::non_negative) {
        if (values_[t] < 0.0) {
          throw DomainError(std::string("negative entry in ") + Tag::unit +
                            " vector at hour " + std::to_string(t + 1));
        }
      }
    }
  }

  Hourly(std::initializer_list<double> values)
      : Hourly(Eigen::Map<const Vector>(values.begin(),
                                        static_cast<Eigen::Index>(values.size()))) {}

  static Hourly constant(std::size_t T, double value) {
    return Hourly(Vector::Constant(static_cast<Eigen::Index>(T), value));
  }

  const Vector& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t t) const { return values_[static_cast<Eigen::Index>(t)]; }
  double sum() const { return values_.sum(); }
  double max() const { return values_.size() ? values_.maxCoeff() : 0.0; }
  double min() const { return values_.size() ? values_.minCoeff() : 0.0; }
  static constexpr const char* unit() { return Tag::unit; }

  friend bool operator==(const Hourly& a, const Hourly& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vector values_;
};

using PriceVector = Hourly<PriceTag>;
using DemandVector = Hourly<EnergyTag>;

//---------------------------------------------------------------------------//
// Market day
//---------------------------------------------------------------------------//

struct MarketDay {
  std::string date;
  PriceVector lambda;
  double p_max = 0.0;

  std::size_t horizon() const { return lambda.size(); }
  double lambda_max() const { return lambda.max(); }

  /// p_max defaults to min_t lambda_t.
  static MarketDay make(std::string date, PriceVector lambda,
                        std::optional<double> p_max = std::nullopt) {
    MarketDay day{std::move(date), std::move(lambda), 0.0};
    day.p_max = p_max.value_or(day.lambda.min());
    return day;
  }
};

//---------------------------------------------------------------------------//
// Prosumers
//---------------------------------------------------------------------------//

struct ProsumerProfile {
  std::string id;
  DemandVector schedule;  // x^0, kWh
  double u = 1.0;         // inelasticity, $/kWh^2
  double a = 1.0;         // flexibility multiplier
  double W = 0.0;         // daily target, kWh

  std::size_t horizon() const { return schedule.size(); }
  double scheduled_total() const { return schedule.sum(); }
  /// Energy traded away over the day: Q = sum(x^0) - W.
  double Q() const { return scheduled_total() - W; }
};

/// How the daily saving Q_i is chosen for a prosumer.
struct QRule {
  enum class Kind { zero, absolute, fraction, uniform };
  Kind kind = Kind::zero;
  double value = 0.0;  // kWh for absolute; multiplier of W otherwise

  static QRule zero() { return {Kind::zero, 0.0}; }
  static QRule absolute(double kwh) { return {Kind::absolute, kwh}; }
  static QRule fraction(double f) { return {Kind::fraction, f}; }
  static QRule uniform(double q) { return {Kind::uniform, q}; }

  /// Parses "zero", "absolute:<kWh>", "fraction:<f>" or "uniform:<q>".
  static QRule parse(const std::string& text) {
    if (text == "zero") return zero();
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw DataError("bad q-rule '" + text + "'");
    const std::string head = text.substr(0, colon);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(text.substr(colon + 1), &used);
      if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("bad q-rule value in '" + text + "'");
    }
    if (!std::isfinite(v) || v < 0.0) throw DataError("q-rule value must be >= 0: '" + text + "'");
    if (head == "absolute") return absolute(v);
    if (head == "fraction") return fraction(v);
    if (head == "uniform") return uniform(v);
    throw DataError("bad q-rule '" + text + "'");
  }

  std::string label() const {
    char buf[64];
    switch (kind) {
      case Kind::zero: return "zero";
      case Kind::absolute: std::snprintf(buf, sizeof buf, "absolute:%g", value); break;
      case Kind::fraction: std::snprintf(buf, sizeof buf, "fraction:%g", value); break;
      case Kind::uniform: std::snprintf(buf, sizeof buf, "uniform:%g", value); break;
    }
    return buf;
  }

  /// Target W for a schedule total S. Fraction rules tie Q to W itself
  /// (Q = f W), so W = S / (1 + f).
  template <class Rng>
  double target(double scheduled_total, Rng& rng) const {
    switch (kind) {
      case Kind::zero: return scheduled_total;
      case Kind::absolute: return scheduled_total - value;
      case Kind::fraction: return scheduled_total / (1.0 + value);
      case Kind::uniform: {
        std::uniform_real_distribution<double> draw(0.0, value);
        return scheduled_total / (1.0 + draw(rng));
      }
    }
    return scheduled_total;
  }
};

//---------------------------------------------------------------------------//
// Game configuration
//---------------------------------------------------------------------------//

struct GameConfig {
  std::vector<ProsumerProfile> prosumers;
  MarketDay day;
  std::size_t sample_budget = 100;  // J
  double forgetting = 0.98;         // m
  std::uint64_t rng_seed = 1;

  std::size_t horizon() const { return day.horizon(); }

  DemandVector baseline_demand() const {
    Vector d = Vector::Zero(static_cast<Eigen::Index>(horizon()));
    for (const auto& p : prosumers) d += p.schedule.values();
    return DemandVector(d);
  }
};

struct Violation {
  std::string field;
  std::string rule;
};

/// Checks every type invariant of a GameConfig. `feature_count` is the
/// basis dimension K; it defaults to the affine basis T + 1.
inline std::vector<Violation> validate_config(const GameConfig& cfg,
                                              std::optional<std::size_t> feature_count = std::nullopt) {
  std::vector<Violation> out;
  const std::size_t T = cfg.horizon();
  const std::size_t K = feature_count.value_or(T + 1);

  if (T == 0) out.push_back({"day.lambda", "horizon T must be positive"});
  for (std::size_t t = 0; t < T; ++t) {
    if (!(cfg.day.lambda[t] > 0.0)) {
      out.push_back({"day.lambda", "market price must be > 0 at hour " + std::to_string(t + 1)});
    }
  }
  if (T > 0 && cfg.day.p_max > cfg.day.lambda.min()) {
    out.push_back({"day.p_max", "p_max exceeds min market price"});
  }
  if (!(cfg.day.p_max >= 0.0) || !std::isfinite(cfg.day.p_max)) {
    out.push_back({"day.p_max", "p_max must be finite and >= 0"});
  }
  if (cfg.prosumers.empty()) out.push_back({"prosumers", "N must be >= 1"});
  if (cfg.sample_budget < K) {
    out.push_back({"sample_budget", "J must be >= K (" + std::to_string(K) + ")"});
  }
  if (!(cfg.forgetting > 0.0 && cfg.forgetting < 1.0)) {
    out.push_back({"forgetting", "m must lie in (0,1)"});
  }

  for (std::size_t i = 0; i < cfg.prosumers.size(); ++i) {
    const auto& p = cfg.prosumers[i];
    const std::string f = "prosumers[" + std::to_string(i) + "]";
    if (p.horizon() != T) {
      out.push_back({f + ".schedule", "length " + std::to_string(p.horizon()) +
                                          " differs from horizon " + std::to_string(T)});
    }
    bool any_positive = false;
    for (std::size_t t = 0; t < p.horizon(); ++t) {
      if (p.schedule[t] < 0.0) out.push_back({f + ".schedule", "negative demand at hour " + std::to_string(t + 1)});
      any_positive = any_positive || p.schedule[t] > 0.0;
    }
    if (!any_positive) out.push_back({f + ".schedule", "schedule must have positive energy in some hour"});
    if (!(p.u > 0.0) || !std::isfinite(p.u)) out.push_back({f + ".u", "inelasticity must lie in (0, inf)"});
    if (!(p.a >= 1.0) || !std::isfinite(p.a)) out.push_back({f + ".a", "flexibility a must be >= 1"});
    const double S = p.scheduled_total();
    if (!(p.W >= 0.0) || p.W > p.a * S * (1.0 + 1e-12)) {
      out.push_back({f + ".W", "target W must lie in [0, a * sum(x0)]"});
    }
  }
  return out;
}

//---------------------------------------------------------------------------//
// Small numeric helpers
//---------------------------------------------------------------------------//

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware).
/// Results must be written to per-index slots so ordering stays deterministic.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Derives an independent stream seed from a base seed and a stream index
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace dragg

#pragma once

// DR-aggregator price problem over the learned surrogate
//   max_p  (lambda - p)^T (d0 - Theta^T phi(p))   s.t.  0 <= p <= p_max,
// plus the true payoff under exact prosumer best responses.

#include "dragg/basis.hpp"
#include "dragg/core.hpp"
#include "dragg/prosumer.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace dragg {

/// Learned surrogate of the aggregator payoff for fixed Theta, d0, lambda.
class Surrogate {
 public:
  Surrogate(Matrix theta, const FeatureBasis& basis, Vector d0, Vector lambda)
      : theta_(std::move(theta)), basis_(&basis), d0_(std::move(d0)), lambda_(std::move(lambda)) {
    const auto T = static_cast<Eigen::Index>(basis.horizon());
    if (theta_.rows() != static_cast<Eigen::Index>(basis.feature_count()) || theta_.cols() != T) {
      throw DomainError("surrogate: Theta must be K x T");
    }
    if (d0_.size() != T || lambda_.size() != T) throw DomainError("surrogate: d0/lambda length mismatch");
  }

  double value(const Vector& p) const {
    if (!basis_->in_box(p)) throw DomainError("surrogate: price outside [0, p_max]^T");
    return value_unchecked(p);
  }

  double value_unchecked(const Vector& p) const {
    return (lambda_ - p).dot(d0_ - theta_.transpose() * basis_->eval_unchecked(p));
  }

  /// grad = -(d0 - Theta^T phi(p)) - J(p)^T Theta (lambda - p).
  Vector gradient(const Vector& p) const {
    const Vector y = theta_.transpose() * basis_->eval_unchecked(p);
    const Matrix J = basis_->jacobian_unchecked(p);
    return -(d0_ - y) - J.transpose() * (theta_ * (lambda_ - p));
  }

  /// Bid quantity Delta d = d0 - Theta^T phi(p).
  Vector learned_delta(const Vector& p) const { return d0_ - theta_.transpose() * basis_->eval(p); }

  const FeatureBasis& basis() const { return *basis_; }
  const Matrix& theta() const { return theta_; }
  const Vector& d0() const { return d0_; }
  const Vector& lambda() const { return lambda_; }

 private:
  Matrix theta_;
  const FeatureBasis* basis_;
  Vector d0_;
  Vector lambda_;
};

inline double surrogate_payoff(const PriceVector& p, const Matrix& theta, const FeatureBasis& basis,
                               const DemandVector& d0, const PriceVector& lambda) {
  return Surrogate(theta, basis, d0.values(), lambda.values()).value(p.values());
}

/// Sum of exact best responses d*(p) = sum_i x_i*(p), accumulated in index order.
inline Vector total_response(const std::vector<ProsumerProfile>& prosumers, const Vector& p) {
  Vector d = Vector::Zero(p.size());
  for (const auto& pr : prosumers) d += best_response(pr, p).x.values();
  return d;
}

/// g_a = (lambda - p)^T (d0 - sum_i x_i*(p)).
inline double true_payoff(const Vector& p, const std::vector<ProsumerProfile>& prosumers, const Vector& lambda) {
  Vector d0 = Vector::Zero(p.size());
  for (const auto& pr : prosumers) d0 += pr.schedule.values();
  return (lambda - p).dot(d0 - total_response(prosumers, p));
}

inline double true_payoff(const PriceVector& p, const std::vector<ProsumerProfile>& prosumers,
                          const PriceVector& lambda) {
  return true_payoff(p.values(), prosumers, lambda.values());
}

struct AscentOptions {
  std::size_t restarts = 16;
  std::size_t max_iterations = 500;
  double step_tol = 1e-8;
  double armijo = 1e-4;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool grid_check = true;  // dense-grid cross-check for affine bases with T <= 2
  std::size_t grid_points = 201;
};

struct AscentRun {
  Vector p;
  double value = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  bool monotone = true;  // every accepted step increased the value
};

struct PriceSolution {
  PriceVector p_eps;
  double surrogate_value = 0.0;
  std::size_t restarts = 0;
  std::vector<double> restart_values;
  bool converged = false;
  bool grid_checked = false;
};

inline Vector project_box(Vector p, double p_max) {
  for (Eigen::Index t = 0; t < p.size(); ++t) p[t] = std::clamp(p[t], 0.0, p_max);
  return p;
}

/// Projected gradient ascent with Armijo backtracking from one start.
inline AscentRun projected_ascent(const Surrogate& g, Vector p, double p_max, const AscentOptions& opt) {
  AscentRun run;
  p = project_box(std::move(p), p_max);
  double f = g.value_unchecked(p);
  if (!std::isfinite(f)) return run;
  Vector grad = g.gradient(p);
  double step = p_max > 0.0 ? p_max / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-12) : 1.0;
  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (!grad.allFinite()) return run;
    bool accepted = false;
    Vector next;
    double f_next = f;
    for (int bt = 0; bt < 60; ++bt) {
      next = project_box(p + step * grad, p_max);
      f_next = g.value_unchecked(next);
      if (std::isfinite(f_next) && f_next >= f + opt.armijo * grad.dot(next - p)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      run.converged = true;  // no ascent direction left at working precision
      break;
    }
    const double moved = (next - p).norm();
    if (f_next < f) run.monotone = false;
    p = std::move(next);
    f = f_next;
    grad = g.gradient(p);
    step *= 2.0;
    if (moved < opt.step_tol) {
      run.converged = true;
      ++it;
      break;
    }
  }
  run.p = std::move(p);
  run.value = f;
  run.iterations = it;
  return run;
}

namespace detail {

/// True when a is a strictly better maximizer than b: higher value, or equal
/// value (to round-off) and lexicographically smaller price.
inline bool better(double va, const Vector& a, double vb, const Vector& b) {
  const double tol = 1e-12 * std::max({1.0, std::abs(va), std::abs(vb)});
  if (va > vb + tol) return true;
  if (vb > va + tol) return false;
  for (Eigen::Index t = 0; t < a.size(); ++t) {
    if (a[t] < b[t] - 1e-12) return true;
    if (a[t] > b[t] + 1e-12) return false;
  }
  return false;
}

}  // namespace detail

/// Multistart projected gradient ascent over [0, p_max]^T. Starts are the
/// corners 0 and p_max 1 plus uniform draws; the best local maximizer wins.
inline PriceSolution maximize_price(const Surrogate& g, double p_max, const AscentOptions& opt = {}) {
  if (opt.restarts < 1) throw DomainError("maximize_price: restarts must be >= 1");
  const auto T = static_cast<Eigen::Index>(g.basis().horizon());

  std::vector<Vector> starts;
  starts.push_back(Vector::Zero(T));
  if (opt.restarts > 1) starts.push_back(Vector::Constant(T, p_max));
  std::mt19937_64 rng(derive_seed(opt.seed, 0xA66));
  std::uniform_real_distribution<double> uni(0.0, p_max);
  while (starts.size() < opt.restarts) {
    Vector s(T);
    for (Eigen::Index t = 0; t < T; ++t) s[t] = uni(rng);
    starts.push_back(std::move(s));
  }

  std::vector<AscentRun> runs(starts.size());
  parallel_for(starts.size(), opt.jobs, [&](std::size_t k) { runs[k] = projected_ascent(g, starts[k], p_max, opt); });

  PriceSolution sol;
  sol.restarts = runs.size();
  const AscentRun* best = nullptr;
  bool all_converged = true;
  for (const auto& r : runs) {
    sol.restart_values.push_back(r.value);
    if (!std::isfinite(r.value)) continue;
    all_converged = all_converged && r.converged;
    if (!best || detail::better(r.value, r.p, best->value, best->p)) best = &r;
  }
  if (!best) throw SolverError("maximize_price: every restart diverged");

  AscentRun chosen = *best;
  if (opt.grid_check && g.basis().kind() == BasisKind::affine && T <= 2 && opt.grid_points >= 2) {
    // Dense-grid audit; a better grid point seeds one more ascent.
    sol.grid_checked = true;
    const std::size_t n = opt.grid_points;
    const double h = p_max / static_cast<double>(n - 1);
    Vector q(T), best_q;
    double best_v = -std::numeric_limits<double>::infinity();
    const std::size_t n2 = T == 2 ? n : 1;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n2; ++k) {
        q[0] = static_cast<double>(i) * h;
        if (T == 2) q[1] = static_cast<double>(k) * h;
        const double v = g.value_unchecked(q);
        if (v > best_v) {
          best_v = v;
          best_q = q;
        }
      }
    }
    if (best_v > chosen.value + 1e-12 * std::max(1.0, std::abs(best_v))) {
      AscentRun polished = projected_ascent(g, best_q, p_max, opt);
      if (polished.value < best_v) {
        polished.p = best_q;
        polished.value = best_v;
      }
      chosen = polished;
    }
  }
  sol.p_eps = PriceVector(project_box(chosen.p, p_max));
  sol.surrogate_value = g.value(sol.p_eps.values());
  sol.converged = all_converged;
  return sol;
}

inline PriceSolution maximize_price(const Matrix& theta, const FeatureBasis& basis, const DemandVector& d0,
                                    const PriceVector& lambda, double p_max, std::size_t restarts,
                                    std::uint64_t seed) {
  AscentOptions opt;
  opt.restarts = restarts;
  opt.seed = seed;
  return maximize_price(Surrogate(theta, basis, d0.values(), lambda.values()), p_max, opt);
}

}  // namespace dragg

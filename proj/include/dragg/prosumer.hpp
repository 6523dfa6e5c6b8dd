#pragma once

// Prosumer best response: the unique maximizer of
//   p^T (x0 - x) - u ||x0 - x||^2   s.t.  1^T x = W,  0 <= x <= a x0.

#include "dragg/core.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace dragg {

enum class Bound { lower, interior, upper };

struct BestResponse {
  DemandVector x;
  double dual_nu = 0.0;
  std::vector<Bound> active_set;
  double utility = 0.0;
};

/// Payoff g_p = sum_t p_t (x0_t - x_t) - u (x0_t - x_t)^2.
inline double prosumer_utility(const ProsumerProfile& profile, const Vector& x, const Vector& p) {
  const Vector& x0 = profile.schedule.values();
  if (x.size() != x0.size() || p.size() != x0.size()) throw DomainError("prosumer_utility: length mismatch");
  const Vector dev = x0 - x;
  return p.dot(dev) - profile.u * dev.squaredNorm();
}

inline double prosumer_utility(const ProsumerProfile& profile, const DemandVector& x, const PriceVector& p) {
  return prosumer_utility(profile, x.values(), p.values());
}

namespace detail {

inline Vector response_at(const Vector& x0, const Vector& p, double u, double a, double nu) {
  Vector x(x0.size());
  for (Eigen::Index t = 0; t < x0.size(); ++t) {
    const double upper = a * x0[t];
    x[t] = std::clamp(x0[t] - (p[t] + nu) / (2.0 * u), 0.0, upper);
  }
  return x;
}

}  // namespace detail

/// Sum_t x_t(nu) for the clipped stationary point; non-increasing in nu.
inline double budget_at(const ProsumerProfile& profile, const Vector& p, double nu) {
  return detail::response_at(profile.schedule.values(), p, profile.u, profile.a, nu).sum();
}

/// Exact best response by bisection on the budget multiplier nu, finished by
/// solving the budget equation on the identified active set.
inline BestResponse best_response(const ProsumerProfile& profile, const Vector& p) {
  const Vector& x0 = profile.schedule.values();
  const auto T = x0.size();
  const double u = profile.u, a = profile.a, W = profile.W;
  if (p.size() != T) throw DomainError("best_response: price length mismatch");
  if (!(u > 0.0)) throw DomainError("best_response: inelasticity must be positive");
  const double cap = a * x0.sum();
  if (!(W >= 0.0) || W > cap * (1.0 + 1e-12) + 1e-15) {
    throw InfeasibleError("prosumer '" + profile.id + "': target W=" + std::to_string(W) +
                          " outside [0, " + std::to_string(cap) + "]");
  }

  const double p_hi = p.size() ? std::max(0.0, p.maxCoeff()) : 0.0;
  const double xmax = x0.size() ? x0.maxCoeff() : 0.0;
  double lo = -p_hi - 2.0 * u * a * xmax - 1.0;  // sum(x(lo)) = a sum(x0) >= W
  double hi = p_hi + 2.0 * u * xmax + 1.0;       // sum(x(hi)) = 0 <= W
  const double tol = 1e-10 * std::max(1.0, W);

  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    nu = 0.5 * (lo + hi);
    const double s = budget_at(profile, p, nu);
    if (std::abs(s - W) <= tol * 1e-3) break;
    if (s > W) lo = nu; else hi = nu;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(nu))) break;
  }

  // Solve the budget equation exactly on the active set at nu.
  Vector x = detail::response_at(x0, p, u, a, nu);
  double fixed = 0.0, free_x0 = 0.0, free_p = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double raw = x0[t] - (p[t] + nu) / (2.0 * u);
    if (x0[t] > 0.0 && raw > 0.0 && raw < a * x0[t]) {
      free_x0 += x0[t];
      free_p += p[t];
      ++n_free;
    } else {
      fixed += x[t];
    }
  }
  if (n_free > 0) {
    const double nu_exact = (2.0 * u * (free_x0 - (W - fixed)) - free_p) / n_free;
    const Vector trial = detail::response_at(x0, p, u, a, nu_exact);
    if (std::abs(trial.sum() - W) <= std::abs(x.sum() - W)) {
      nu = nu_exact;
      x = trial;
    }
  }

  BestResponse br;
  br.dual_nu = nu;
  br.active_set.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    const double raw = x0[t] - (p[t] + nu) / (2.0 * u);
    br.active_set[static_cast<std::size_t>(t)] =
        (x0[t] <= 0.0 || raw <= 0.0) ? Bound::lower : raw >= a * x0[t] ? Bound::upper : Bound::interior;
  }
  if (std::abs(x.sum() - W) > 1e-9 * std::max(1.0, W)) {
    throw SolverError("prosumer '" + profile.id + "': budget residual " + std::to_string(x.sum() - W));
  }
  br.utility = prosumer_utility(profile, x, p);
  br.x = DemandVector(std::move(x));
  return br;
}

inline BestResponse best_response(const ProsumerProfile& profile, const PriceVector& p) {
  return best_response(profile, p.values());
}

/// Analytic Lipschitz modulus of g_p on X_i x P under the metric
/// ||x - x'|| + ||p - p'||. On the box 0 <= x <= a x0 every deviation
/// satisfies |x0_t - x_t| <= c x0_t with c = max(1, a - 1), hence
///   ||grad_x g|| <= ||p|| + 2u ||x0 - x|| <= sqrt(T) p_max + 2 u c ||x0||,
///   ||grad_p g|| =  ||x0 - x||             <= c ||x0||,
/// and L_p is the larger of the two.
inline double utility_lipschitz(const ProsumerProfile& profile, double p_max) {
  const double T = static_cast<double>(profile.horizon());
  const double c = std::max(1.0, profile.a - 1.0);
  const double x0n = profile.schedule.values().norm();
  return std::max(std::sqrt(T) * p_max + 2.0 * profile.u * c * x0n, c * x0n);
}

/// Empirical Lipschitz ratio ||x*(p) - x*(p')|| / ||p - p'|| of the best
/// response over random pairs in the box: half far pairs, half near pairs.
template <class Rng>
double estimate_response_lipschitz(const ProsumerProfile& profile, double p_max, std::size_t pairs, Rng& rng) {
  const auto T = static_cast<Eigen::Index>(profile.horizon());
  std::uniform_real_distribution<double> uni(0.0, p_max);
  double best = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    Vector p(T), q(T);
    for (Eigen::Index t = 0; t < T; ++t) p[t] = uni(rng);
    if (k % 2 == 0) {
      for (Eigen::Index t = 0; t < T; ++t) q[t] = uni(rng);
    } else {
      std::uniform_real_distribution<double> near(-1e-3 * p_max, 1e-3 * p_max);
      for (Eigen::Index t = 0; t < T; ++t) q[t] = std::clamp(p[t] + near(rng), 0.0, p_max);
    }
    const double dp = (p - q).norm();
    if (dp <= 1e-14) continue;
    const double dx = (best_response(profile, p).x.values() - best_response(profile, q).x.values()).norm();
    best = std::max(best, dx / dp);
  }
  return best;
}

/// Re-checks the constraints of a response; returns an empty string when valid.
inline std::string check_response(const ProsumerProfile& profile, const Vector& x, double budget_tol = 1e-9) {
  const Vector& x0 = profile.schedule.values();
  if (x.size() != x0.size()) return "length mismatch";
  if (std::abs(x.sum() - profile.W) > budget_tol) return "budget violated";
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    if (x[t] < -1e-12 || x[t] > profile.a * x0[t] + 1e-12) return "box violated at hour " + std::to_string(t + 1);
  }
  return {};
}

}  // namespace dragg

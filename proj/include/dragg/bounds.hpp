#pragma once

// Constants and quality bounds for the approximate equilibrium: the learning
// ball radius factor eta, the surrogate Lipschitz modulus L_a, the distance
// bound on the perturbed maximizer, and the utility gaps eps_a / eps_p.

#include "dragg/aggregator.hpp"
#include "dragg/basis.hpp"
#include "dragg/learning.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dragg {

enum class Provenance { certified, estimate };

inline const char* to_string(Provenance p) { return p == Provenance::certified ? "certified" : "estimate"; }

struct BoundInputs {
  std::size_t T = 0;
  double lambda_max = 0.0;
  double p_max = 0.0;
  double phi_max = 0.0;
  double L_phi = 0.0;
  double L_dphi = 0.0;
  double theta_max = 0.0;                 // observed ||Theta^J||_F
  std::optional<double> theta_r_max;      // ||Theta_c* - Theta*||_F bound
  std::optional<double> eps_m_max;        // approximation error bound
  std::optional<double> delta;            // quadratic-growth constant
  double m = 0.98;
  std::size_t M = 1;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double lambda_max_pi0_inv = 0.0;
  double d0_norm = 0.0;
  std::vector<double> L_i_hat;            // best-response Lipschitz, per prosumer
  std::vector<double> L_pi;               // utility Lipschitz, per prosumer

  std::map<std::string, Provenance> provenance;
};

//---------------------------------------------------------------------------//
// Learning constants
//---------------------------------------------------------------------------//

namespace detail {
inline void check_forgetting(double m, double beta0) {
  if (!(m > 0.0 && m < 1.0)) throw DomainError("forgetting factor m must lie in (0,1)");
  if (!(beta0 > 0.0)) throw DomainError("excitation level beta0 must be > 0");
}
/// (m^-(M+1) - 1) / (beta0 (m^-1 - 1)), the inverse lower bound on Pi^{-1}.
inline double pi_bound(double m, std::size_t M, double beta0) {
  return (std::pow(m, -(static_cast<double>(M) + 1.0)) - 1.0) / (beta0 * (1.0 / m - 1.0));
}
}  // namespace detail

/// eta = ((m^-(M+1) - 1) / (beta0 (m^-1 - 1)))^{3/2} sqrt(beta1 lambda_max(Pi0^-1)) / (1 - sqrt m).
inline double eta_constant(double m, std::size_t M, double beta0, double beta1, double lambda_max_pi0_inv) {
  detail::check_forgetting(m, beta0);
  const double c = detail::pi_bound(m, M, beta0);
  return std::pow(c, 1.5) * std::sqrt(beta1 * lambda_max_pi0_inv) / (1.0 - std::sqrt(m));
}

/// zeta in ||Theta~^j||_F^2 <= zeta m^j ||Theta~^0||_F^2.
inline double zeta_constant(double m, std::size_t M, double beta0, double lambda_max_pi0_inv) {
  detail::check_forgetting(m, beta0);
  return detail::pi_bound(m, M, beta0) * lambda_max_pi0_inv;
}

/// zeta_1: transient weight of the first M gains ||Pi^k phi^k||.
inline double zeta1_constant(double m, std::size_t M, double gain_norm_sum) {
  if (!(m > 0.0 && m < 1.0)) throw DomainError("forgetting factor m must lie in (0,1)");
  const double r = std::pow(m, -0.5);
  return r * (std::pow(m, -static_cast<double>(M) / 2.0) - 1.0) / (r - 1.0) * gain_norm_sum;
}

/// zeta_2: uniform bound on ||Pi^k phi^k|| once excitation holds.
inline double zeta2_constant(double m, std::size_t M, double beta0, double beta1) {
  detail::check_forgetting(m, beta0);
  return detail::pi_bound(m, M, beta0) * std::sqrt(beta1);
}

//---------------------------------------------------------------------------//
// Lipschitz constants and bounds
//---------------------------------------------------------------------------//

/// L_a = max{(lambda_max + p_max) theta_max L_phi + ||d0|| + theta_max phi_max, (lambda_max + p_max) phi_max}.
inline double lipschitz_La(const BoundInputs& in) {
  const double s = in.lambda_max + in.p_max;
  const double L1 = s * in.theta_max * in.L_phi + in.d0_norm + in.theta_max * in.phi_max;
  const double L2 = s * in.phi_max;
  return std::max(L1, L2);
}

inline double lipschitz_Lh(double L_a) { return 2.0 * L_a; }

namespace detail {
inline double require(const std::optional<double>& v, const char* name, std::vector<std::string>& missing) {
  if (!v) {
    missing.emplace_back(name);
    return 0.0;
  }
  return *v;
}
/// sqrt(T)(lambda_max + p_max)(eta eps_m L_phi + theta_r L_dphi) + (eta phi_max + 1) eps_m
inline double gradient_bound(const BoundInputs& in, double eta, double eps_m, double theta_r) {
  return std::sqrt(static_cast<double>(in.T)) * (in.lambda_max + in.p_max) *
             (eta * eps_m * in.L_phi + theta_r * in.L_dphi) +
         (eta * in.phi_max + 1.0) * eps_m;
}
inline void throw_missing(const std::vector<std::string>& missing) {
  if (missing.empty()) return;
  std::string msg = "missing estimated inputs:";
  for (const auto& s : missing) msg += " " + s;
  throw DomainError(msg);
}
}  // namespace detail

/// dist(p_eps, M^s) <= (1/delta + 2 L_a / sqrt(delta)) * gradient bound.
inline double dist_bound(const BoundInputs& in, double eta, double L_a) {
  std::vector<std::string> missing;
  const double delta = detail::require(in.delta, "delta", missing);
  const double eps_m = detail::require(in.eps_m_max, "eps_m_max", missing);
  const double theta_r = detail::require(in.theta_r_max, "theta_r_max", missing);
  detail::throw_missing(missing);
  if (!(delta > 0.0)) throw DomainError("quadratic-growth constant delta must be > 0");
  return (1.0 / delta + 2.0 * L_a / std::sqrt(delta)) * detail::gradient_bound(in, eta, eps_m, theta_r);
}

struct EpsilonBounds {
  double eps_a = 0.0;
  std::vector<double> eps_p;
};

/// eps_a = L_a (dist + theta_r + eta eps_m),  eps_p_i = L_pi (L_i + 1) dist.
inline EpsilonBounds epsilon_bounds(const BoundInputs& in, double eta, double L_a, double dist) {
  std::vector<std::string> missing;
  const double eps_m = detail::require(in.eps_m_max, "eps_m_max", missing);
  const double theta_r = detail::require(in.theta_r_max, "theta_r_max", missing);
  if (in.L_i_hat.size() != in.L_pi.size()) missing.emplace_back("L_i_hat (per prosumer)");
  detail::throw_missing(missing);
  EpsilonBounds e;
  e.eps_a = L_a * (dist + theta_r + eta * eps_m);
  e.eps_p.reserve(in.L_pi.size());
  for (std::size_t i = 0; i < in.L_pi.size(); ++i) e.eps_p.push_back(in.L_pi[i] * (in.L_i_hat[i] + 1.0) * dist);
  return e;
}

//---------------------------------------------------------------------------//
// Report
//---------------------------------------------------------------------------//

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct BoundReport {
  BoundInputs inputs;
  double eta = 0.0;
  double zeta = 0.0;
  double zeta2 = 0.0;
  double L_a = 0.0;
  double L_h = 0.0;
  double dist_bound = 0.0;
  double eps_a = 0.0;
  std::vector<double> eps_p;
  Interval g_a_interval;
  std::vector<Interval> g_p_intervals;
  std::vector<std::string> diagnostics;
};

/// Assembles every constant. Missing or degenerate inputs yield +inf bounds
/// with a diagnostic instead of throwing.
inline BoundReport compute_bound_report(const BoundInputs& in, double g_a_surrogate,
                                        const std::vector<double>& g_p_values) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundReport r;
  r.inputs = in;
  r.L_a = lipschitz_La(in);
  r.L_h = lipschitz_Lh(r.L_a);

  bool ok = true;
  if (!(in.beta0 > 0.0)) {
    r.diagnostics.emplace_back("persistent excitation not observed (beta0 = 0); eta undefined");
    ok = false;
  } else {
    r.eta = eta_constant(in.m, in.M, in.beta0, in.beta1, in.lambda_max_pi0_inv);
    r.zeta = zeta_constant(in.m, in.M, in.beta0, in.lambda_max_pi0_inv);
    r.zeta2 = zeta2_constant(in.m, in.M, in.beta0, in.beta1);
  }
  if (!in.delta || !in.eps_m_max || !in.theta_r_max) {
    r.diagnostics.emplace_back("estimated inputs missing; bounds unavailable");
    ok = false;
  } else if (*in.delta <= 1e-8) {
    r.diagnostics.emplace_back("quadratic-growth estimate delta <= 1e-8; bounds reported as +inf");
    ok = false;
  }
  if (!ok) {
    r.eta = r.eta > 0.0 ? r.eta : inf;
    r.dist_bound = inf;
    r.eps_a = inf;
    r.eps_p.assign(g_p_values.size(), inf);
  } else {
    r.dist_bound = dist_bound(in, r.eta, r.L_a);
    auto e = epsilon_bounds(in, r.eta, r.L_a, r.dist_bound);
    r.eps_a = e.eps_a;
    r.eps_p = std::move(e.eps_p);
  }
  r.g_a_interval = {g_a_surrogate - r.eps_a, g_a_surrogate + r.eps_a};
  for (std::size_t i = 0; i < g_p_values.size(); ++i) {
    const double e = i < r.eps_p.size() ? r.eps_p[i] : inf;
    r.g_p_intervals.push_back({g_p_values[i] - e, g_p_values[i] + e});
  }
  return r;
}

//---------------------------------------------------------------------------//
// Estimators for the constants the theory only assumes to exist
//---------------------------------------------------------------------------//

struct ErrorEstimates {
  double eps_m_max = 0.0;   // max holdout residual (a lower estimate)
  double theta_r_max = 0.0; // distance to a richer-basis refit
  double delta = 0.0;       // curvature of the surrogate at p_eps
  double theta_max = 0.0;   // ||Theta^J||_F
};

/// Quadratic-growth estimate: along `directions` random unit directions at p,
/// fit f(s) = c0 + c1 s + c2 s^2 on five symmetric points and return the
/// smallest -c2 (clamped at 0).
inline double estimate_curvature(const Surrogate& g, const Vector& p, std::size_t directions, std::uint64_t seed,
                                 double half_width) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::array<double, 5> s{-1.0, -0.5, 0.0, 0.5, 1.0};
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < directions; ++k) {
    Vector v(p.size());
    for (Eigen::Index t = 0; t < v.size(); ++t) v[t] = normal(rng);
    if (v.norm() == 0.0) continue;
    v.normalize();
    Eigen::Matrix<double, 5, 3> A;
    Eigen::Matrix<double, 5, 1> y;
    for (int i = 0; i < 5; ++i) {
      const double h = s[static_cast<std::size_t>(i)] * half_width;
      A(i, 0) = 1.0;
      A(i, 1) = h;
      A(i, 2) = h * h;
      y[i] = g.value_unchecked(p + h * v);
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
    delta = std::min(delta, std::max(0.0, -c[2]));
  }
  return std::isfinite(delta) ? delta : 0.0;
}

/// Estimates eps_m_max, theta_r_max, delta and theta_max from a trained
/// learner and a disjoint holdout set of (p, d*) pairs.
inline ErrorEstimates estimate_error_inputs(const LearnerState& learner, const FeatureBasis& basis,
                                            const std::vector<std::pair<Vector, Vector>>& holdout,
                                            const Surrogate* surrogate = nullptr, const Vector* p_eps = nullptr,
                                            std::uint64_t seed = 0, std::size_t directions = 16) {
  if (holdout.empty()) throw DomainError("estimate_error_inputs: empty holdout");
  ErrorEstimates e;
  e.theta_max = learner.theta.norm();
  for (const auto& [p, d] : holdout) {
    e.eps_m_max = std::max(e.eps_m_max, (d - learner.theta.transpose() * basis.eval(p)).norm());
  }

  // Refit on a richer basis whose leading features match, then compare.
  const FeatureBasis rich = basis.enlarged();
  std::vector<Vector> phis, ds;
  for (const auto& s : learner.log) {
    if (s.p.size() == 0) continue;
    phis.push_back(rich.eval(s.p));
    ds.push_back(s.d);
  }
  for (const auto& [p, d] : holdout) {
    phis.push_back(rich.eval(p));
    ds.push_back(d);
  }
  const auto Kr = static_cast<Eigen::Index>(rich.feature_count());
  const auto K = learner.theta.rows();
  const auto T = learner.theta.cols();
  if (phis.size() >= static_cast<std::size_t>(Kr)) {
    const Matrix prior_inv = Matrix::Identity(Kr, Kr) * 1e-8;
    Matrix rich_theta;
    try {
      rich_theta = batch_ls(phis, ds, 1.0 - 1e-12, Matrix::Zero(Kr, T), prior_inv);
    } catch (const SolverError&) {
      rich_theta = batch_ls(phis, ds, 1.0 - 1e-12, Matrix::Zero(Kr, T), Matrix::Identity(Kr, Kr) * 1e-4);
    }
    Matrix padded = Matrix::Zero(Kr, T);
    padded.topRows(K) = learner.theta;
    if (basis.kind() == BasisKind::random_fourier) {
      // Doubling R shrinks the cosine amplitude by sqrt(2).
      padded.middleRows(1, K - 1) *= std::sqrt(static_cast<double>(Kr - 1) / static_cast<double>(K - 1));
    }
    e.theta_r_max = (rich_theta - padded).norm();
  } else {
    e.theta_r_max = std::numeric_limits<double>::infinity();
  }

  if (surrogate && p_eps) {
    e.delta = estimate_curvature(*surrogate, *p_eps, directions, seed, 0.1 * std::max(basis.p_max(), 1e-12));
  }
  return e;
}

}  // namespace dragg

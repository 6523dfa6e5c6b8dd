#pragma once

// Forgetting-factor recursive least squares for the cumulative best response
// d*(p) ~ Theta^T phi(p), its batch closed form, and excitation diagnostics.

#include "dragg/basis.hpp"
#include "dragg/core.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

namespace dragg {

struct Sample {
  Vector p;                   // sampled price p_r^j
  Vector phi;                 // phi(p_r^j)
  Vector d;                   // observed d*^j
  double innovation_norm = 0; // ||eps^j||_2
  double gain_norm = 0;       // ||Pi^{j-1} phi^j||_2
};

/// RLS state. Theta is K x T, Pi is K x K and symmetric positive definite.
struct LearnerState {
  Matrix theta;
  Matrix pi;
  double m = 0.98;
  std::size_t j = 0;
  bool keep_log = true;
  std::vector<Sample> log;

  static LearnerState init(std::size_t K, std::size_t T, double m, double pi0_scale = 10.0,
                           std::optional<Matrix> theta0 = std::nullopt) {
    return init(Matrix::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K)) * pi0_scale, T, m,
                std::move(theta0));
  }

  static LearnerState init(Matrix pi0, std::size_t T, double m, std::optional<Matrix> theta0 = std::nullopt) {
    if (!(m > 0.0 && m <= 1.0)) throw DomainError("forgetting factor must lie in (0,1]");
    const auto K = pi0.rows();
    if (pi0.cols() != K) throw DomainError("Pi0 must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(pi0, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw DomainError("Pi0 must be positive definite");
    LearnerState s;
    s.pi = 0.5 * (pi0 + pi0.transpose());
    s.theta = theta0.value_or(Matrix::Zero(K, static_cast<Eigen::Index>(T)));
    if (s.theta.rows() != K || s.theta.cols() != static_cast<Eigen::Index>(T)) {
      throw DomainError("Theta0 must be K x T");
    }
    s.m = m;
    return s;
  }

  std::size_t feature_count() const { return static_cast<std::size_t>(theta.rows()); }
  std::size_t horizon() const { return static_cast<std::size_t>(theta.cols()); }

  /// Learned demand Theta^T phi.
  Vector predict(const Vector& phi) const { return theta.transpose() * phi; }
};

/// One RLS update on a feature vector. Returns the innovation
/// eps = d^T - phi^T Theta^{j-1} (as a length-T vector).
inline Vector rls_step(LearnerState& s, const Vector& phi, const Vector& d, const Vector* p = nullptr) {
  if (phi.size() != s.theta.rows() || d.size() != s.theta.cols()) throw DomainError("rls_step: dimension mismatch");
  if (!phi.allFinite() || !d.allFinite()) throw DomainError("rls_step: non-finite input");

  const Vector pi_phi = s.pi * phi;
  const double denom = s.m + phi.dot(pi_phi);
  if (!(denom > 0.0) || !std::isfinite(denom)) throw SolverError("rls_step: non-positive innovation denominator");

  const Vector eps = d - s.theta.transpose() * phi;
  s.theta.noalias() += pi_phi * (eps.transpose() / denom);
  s.pi = (s.pi - pi_phi * pi_phi.transpose() / denom) / s.m;
  s.pi = 0.5 * (s.pi + s.pi.transpose());

  if (!s.theta.allFinite()) throw SolverError("rls_step: non-finite estimate");
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.pi, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw SolverError("rls_step: Pi lost positive definiteness (lambda_min = " +
                      std::to_string(es.eigenvalues().minCoeff()) + ") at j = " + std::to_string(s.j + 1));
  }
  ++s.j;
  if (s.keep_log) {
    s.log.push_back(Sample{p ? *p : Vector(), phi, d, eps.norm(), pi_phi.norm()});
  }
  return eps;
}

/// RLS update from a sampled price; evaluates the basis at p.
inline Vector rls_step(LearnerState& s, const PriceVector& p, const DemandVector& d, const FeatureBasis& basis) {
  const Vector phi = basis.eval(p.values());
  return rls_step(s, phi, d.values(), &p.values());
}

/// Closed-form minimizer of
///   1/2 sum_j m^{J-j} ||d^j - Theta^T phi^j||^2 + 1/2 m^J tr((Theta-Theta0)^T Pi0^{-1} (Theta-Theta0)),
/// i.e. (Phi M Phi^T + m^J Pi0^{-1})^{-1} (Phi M D + m^J Pi0^{-1} Theta0) with sample weights m^{J-j}.
inline Matrix batch_ls(const std::vector<Vector>& phis, const std::vector<Vector>& ds, double m, const Matrix& theta0,
                       const Matrix& pi0_inv) {
  if (phis.size() != ds.size()) throw DomainError("batch_ls: sample count mismatch");
  const auto K = theta0.rows();
  const auto T = theta0.cols();
  const std::size_t J = phis.size();
  const double mJ = std::pow(m, static_cast<double>(J));
  Matrix A = mJ * pi0_inv;
  Matrix B = mJ * pi0_inv * theta0;
  for (std::size_t j = 0; j < J; ++j) {
    if (phis[j].size() != K || ds[j].size() != T) throw DomainError("batch_ls: dimension mismatch");
    const double w = std::pow(m, static_cast<double>(J - 1 - j));
    A.noalias() += w * phis[j] * phis[j].transpose();
    B.noalias() += w * phis[j] * ds[j].transpose();
  }
  A = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  const double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(cond < 1e15)) {
    throw SolverError("batch_ls: normal matrix singular (condition number " + std::to_string(cond) + ")");
  }
  return A.ldlt().solve(B);
}

inline Matrix batch_ls(const std::vector<Sample>& log, double m, const Matrix& theta0, const Matrix& pi0_inv) {
  std::vector<Vector> phis, ds;
  phis.reserve(log.size());
  ds.reserve(log.size());
  for (const auto& s : log) {
    phis.push_back(s.phi);
    ds.push_back(s.d);
  }
  return batch_ls(phis, ds, m, theta0, pi0_inv);
}

/// Batch fit from raw (p, d) pairs through a basis.
inline Matrix batch_ls(const std::vector<std::pair<Vector, Vector>>& samples, const FeatureBasis& basis, double m,
                       const Matrix& theta0, const Matrix& pi0_inv) {
  std::vector<Vector> phis, ds;
  for (const auto& [p, d] : samples) {
    phis.push_back(basis.eval(p));
    ds.push_back(d);
  }
  return batch_ls(phis, ds, m, theta0, pi0_inv);
}

struct PEReport {
  std::size_t window = 0;  // M; each window holds M + 1 samples
  double beta0 = 0.0;
  double beta1 = 0.0;
  bool satisfied = false;
};

/// Persistent-excitation check: extreme eigenvalues of sum_{j=k}^{k+M} phi phi^T
/// over every window of the log.
inline PEReport pe_check(const std::vector<Vector>& phis, std::size_t M) {
  if (phis.size() < M + 1) throw DomainError("pe_check: log shorter than window");
  const auto K = phis.front().size();
  PEReport r;
  r.window = M;
  r.beta0 = std::numeric_limits<double>::infinity();
  r.beta1 = 0.0;
  Matrix S = Matrix::Zero(K, K);
  for (std::size_t j = 0; j <= M; ++j) S.noalias() += phis[j] * phis[j].transpose();
  for (std::size_t k = 0;; ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    r.beta0 = std::min(r.beta0, std::max(0.0, es.eigenvalues().minCoeff()));
    r.beta1 = std::max(r.beta1, es.eigenvalues().maxCoeff());
    if (k + M + 1 >= phis.size()) break;
    S.noalias() -= phis[k] * phis[k].transpose();
    S.noalias() += phis[k + M + 1] * phis[k + M + 1].transpose();
  }
  // Rank-deficient windows come out at round-off level rather than exactly 0.
  if (r.beta0 <= 1e-12 * std::max(1.0, r.beta1)) r.beta0 = 0.0;
  r.satisfied = r.beta0 > 0.0 && r.beta0 <= r.beta1 && std::isfinite(r.beta1);
  return r;
}

inline PEReport pe_check(const std::vector<Sample>& log, std::size_t M) {
  std::vector<Vector> phis;
  phis.reserve(log.size());
  for (const auto& s : log) phis.push_back(s.phi);
  return pe_check(phis, M);
}

/// Frobenius learning error ||Theta* - Theta^j||_F after each step of an RLS
/// run over the given features/targets. Entry 0 is the initial error.
inline std::vector<double> convergence_trace(LearnerState state, const std::vector<Vector>& phis,
                                             const std::vector<Vector>& ds, const Matrix& theta_star) {
  std::vector<double> out;
  out.reserve(phis.size() + 1);
  state.keep_log = false;
  out.push_back((theta_star - state.theta).norm());
  for (std::size_t j = 0; j < phis.size(); ++j) {
    rls_step(state, phis[j], ds[j]);
    out.push_back((theta_star - state.theta).norm());
  }
  return out;
}

/// Least-squares slope of log(err) against step index over [from, to).
inline double log_decay_slope(const std::vector<double>& err, std::size_t from, std::size_t to) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = 0;
  for (std::size_t j = from; j < to && j < err.size(); ++j) {
    if (!(err[j] > 0.0)) continue;
    const double x = static_cast<double>(j), y = std::log(err[j]);
    sx += x; sy += y; sxx += x * x; sxy += x * y; n += 1;
  }
  if (n < 2) return 0.0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// When to stop sampling: a fixed budget, or earlier once the relative
/// change of Theta over the last `lag` samples drops below `change_tol`.
struct StopRule {
  std::size_t max_samples = 100;
  std::optional<double> change_tol;
  std::size_t lag = 10;
  std::size_t min_samples = 0;  // raised to K by the driver

  static StopRule fixed(std::size_t J) { return {J, std::nullopt, 10, 0}; }
  static StopRule converged(std::size_t J_max, double tol = 1e-3) { return {J_max, tol, 10, 0}; }
};

/// Tracks the change criterion for a StopRule.
class StopMonitor {
 public:
  explicit StopMonitor(StopRule rule) : rule_(rule) {}

  /// Call after each step; returns true when sampling should stop.
  bool update(const LearnerState& s) {
    if (s.j >= rule_.max_samples) return true;
    if (!rule_.change_tol) return false;
    history_.push_back(s.theta);
    if (history_.size() > rule_.lag + 1) history_.erase(history_.begin());
    if (s.j < std::max(rule_.min_samples, rule_.lag + 1) || history_.size() <= rule_.lag) return false;
    const double denom = s.theta.norm();
    if (denom <= 0.0) return false;
    return (s.theta - history_.front()).norm() / denom < *rule_.change_tol;
  }

 private:
  StopRule rule_;
  std::vector<Matrix> history_;
};

/// Uniform draw from [0, p_max]^T.
template <class Rng>
Vector sample_price(Rng& rng, std::size_t T, double p_max) {
  std::uniform_real_distribution<double> uni(0.0, p_max);
  Vector p(static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < p.size(); ++t) p[t] = uni(rng);
  return p;
}

/// CSV export of a sample log: j, p_1..p_T, d_1..d_T, eps_norm.
inline void write_sample_log_csv(std::ostream& os, const std::vector<Sample>& log) {
  if (log.empty()) {
    os << "j,eps_norm\n";
    return;
  }
  const auto T = log.front().d.size();
  os << "j";
  for (Eigen::Index t = 0; t < T; ++t) os << ",p_" << t + 1;
  for (Eigen::Index t = 0; t < T; ++t) os << ",d_" << t + 1;
  os << ",eps_norm\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (std::size_t j = 0; j < log.size(); ++j) {
    os << j + 1;
    for (Eigen::Index t = 0; t < T; ++t) os << ',' << (log[j].p.size() ? num(log[j].p[t]) : "");
    for (Eigen::Index t = 0; t < T; ++t) os << ',' << num(log[j].d[t]);
    os << ',' << num(log[j].innovation_norm) << '\n';
  }
}

}  // namespace dragg

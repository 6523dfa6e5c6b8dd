#pragma once

// Independent reference computations used only by the tests. None of these
// call the solver code they are checking.

#include "dragg/core.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using dragg::Matrix;
using dragg::Vector;

struct Profile {
  Vector x0;
  double u, a, W;
};

inline double utility(const Profile& pr, const Vector& x, const Vector& p) {
  double g = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    const double dev = pr.x0[t] - x[t];
    g += p[t] * dev - pr.u * dev * dev;
  }
  return g;
}

struct GridResult {
  Vector x;
  double utility = -std::numeric_limits<double>::infinity();
};

/// Exhaustive search over the budget slice sum(x) = W inside the box, with
/// the free coordinates on a grid of spacing `step` (T <= 3).
inline GridResult brute_force_best_response(const Profile& pr, const Vector& p, double step) {
  const auto T = pr.x0.size();
  if (T > 3) throw std::invalid_argument("brute-force oracle refuses T > 3");
  GridResult best;
  auto consider = [&](const Vector& x) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (x[t] < -1e-12 || x[t] > pr.a * pr.x0[t] + 1e-12) return;
    }
    const double g = utility(pr, x, p);
    if (g > best.utility) {
      best.utility = g;
      best.x = x;
    }
  };
  auto axis = [&](double lo, double hi) {
    std::vector<double> v;
    if (hi < lo) return v;
    const long n = static_cast<long>(std::floor((hi - lo) / step));
    for (long k = 0; k <= n; ++k) v.push_back(lo + static_cast<double>(k) * step);
    if (v.empty() || v.back() < hi) v.push_back(hi);
    return v;
  };
  if (T == 1) {
    consider(Vector::Constant(1, pr.W));
  } else if (T == 2) {
    for (double x1 : axis(0.0, pr.a * pr.x0[0])) {
      Vector x(2);
      x << x1, pr.W - x1;
      consider(x);
    }
  } else {
    for (double x1 : axis(0.0, pr.a * pr.x0[0])) {
      for (double x2 : axis(0.0, pr.a * pr.x0[1])) {
        Vector x(3);
        x << x1, x2, pr.W - x1 - x2;
        consider(x);
      }
    }
  }
  if (!std::isfinite(best.utility)) throw std::runtime_error("oracle: empty feasible grid");
  return best;
}

/// Maximizer of f over [0, p_max]^T (T <= 2) by a dense grid followed by
/// repeated zooms around the incumbent.
inline std::pair<Vector, double> grid_maximize(const std::function<double(const Vector&)>& f, std::size_t T,
                                               double p_max, std::size_t points = 1001, int zooms = 0) {
  if (T > 2) throw std::invalid_argument("grid oracle refuses T > 2");
  Vector lo = Vector::Zero(static_cast<Eigen::Index>(T)), hi = Vector::Constant(static_cast<Eigen::Index>(T), p_max);
  Vector best;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int z = 0; z <= zooms; ++z) {
    const std::size_t n = points;
    Vector q(static_cast<Eigen::Index>(T));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < (T == 2 ? n : 1); ++k) {
        q[0] = lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / static_cast<double>(n - 1);
        if (T == 2) q[1] = lo[1] + (hi[1] - lo[1]) * static_cast<double>(k) / static_cast<double>(n - 1);
        const double v = f(q);
        if (v > best_v) {
          best_v = v;
          best = q;
        }
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto e = static_cast<Eigen::Index>(t);
      const double h = 2.0 * (hi[e] - lo[e]) / static_cast<double>(n - 1);
      lo[e] = std::max(0.0, best[e] - h);
      hi[e] = std::min(p_max, best[e] + h);
    }
  }
  return {best, best_v};
}

/// Central finite differences of a vector function, one column per input.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Learning-ball factor written through the intermediate constants
/// zeta = c lambda_max(Pi0^-1) and zeta2 = c sqrt(beta1), with
/// c = (m^-(M+1) - 1) / (beta0 (m^-1 - 1)):  eta = sqrt(zeta) zeta2 / (1 - sqrt m).
inline double eta(double m, std::size_t M, double beta0, double beta1, double lmax_pi0_inv) {
  const double c = (1.0 / std::pow(m, static_cast<double>(M + 1)) - 1.0) / (beta0 * (1.0 / m - 1.0));
  const double zeta = c * lmax_pi0_inv;
  const double zeta2 = c * std::sqrt(beta1);
  return std::sqrt(zeta) * zeta2 / (1.0 - std::sqrt(m));
}

/// Plain recursive least squares written from the normal equations: after
/// each sample, re-solve the weighted regularized problem from scratch.
inline Matrix weighted_ls(const std::vector<Vector>& phis, const std::vector<Vector>& ds, double m,
                          const Matrix& theta0, const Matrix& pi0_inv) {
  const std::size_t J = phis.size();
  Matrix A = std::pow(m, static_cast<double>(J)) * pi0_inv;
  Matrix B = A * theta0;
  for (std::size_t j = 0; j < J; ++j) {
    const double w = std::pow(m, static_cast<double>(J - 1 - j));
    A += w * phis[j] * phis[j].transpose();
    B += w * phis[j] * ds[j].transpose();
  }
  return A.fullPivLu().solve(B);
}

}  // namespace oracle

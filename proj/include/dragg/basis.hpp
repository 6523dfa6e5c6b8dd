#pragma once

// Feature maps phi(p) over the price box [0, p_max]^T, together with their
// analytically certified norm and Lipschitz constants.

#include "dragg/core.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace dragg {

enum class BasisKind {
  affine,               // [1; p]                      K = T + 1
  quadratic_diagonal,   // [1; p; p^2]                 K = 2T + 1
  polynomial_diagonal,  // [1; p; ...; p^D], D >= 3    K = D T + 1
  random_fourier,       // [1; s cos(W p + b)]         K = R + 1
};

inline std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::affine: return "affine";
    case BasisKind::quadratic_diagonal: return "quadratic-diagonal";
    case BasisKind::polynomial_diagonal: return "polynomial-diagonal";
    case BasisKind::random_fourier: return "random-fourier";
  }
  return "?";
}

struct BasisConstants {
  double phi_max = 0.0;  // sup ||phi(p)||_2 over the box
  double L_phi = 0.0;    // Lipschitz constant of phi
  double L_dphi = 0.0;   // Lipschitz constant of the Jacobian (spectral norm)
};

/// Immutable feature map. Diagonal polynomial kinds stack powers of each
/// price coordinate; random-fourier draws frozen frequencies from a seed.
class FeatureBasis {
 public:
  static FeatureBasis affine(std::size_t T, double p_max) { return polynomial(T, p_max, 1); }
  static FeatureBasis quadratic_diagonal(std::size_t T, double p_max) { return polynomial(T, p_max, 2); }

  static FeatureBasis polynomial(std::size_t T, double p_max, int degree) {
    if (degree < 1) throw DomainError("polynomial basis degree must be >= 1");
    FeatureBasis b(T, p_max);
    b.degree_ = degree;
    b.kind_ = degree == 1 ? BasisKind::affine
              : degree == 2 ? BasisKind::quadratic_diagonal
                            : BasisKind::polynomial_diagonal;
    b.K_ = static_cast<std::size_t>(degree) * T + 1;
    return b;
  }

  /// R cosine features with frequencies ~ N(0, (bandwidth / p_max)^2) and
  /// phases ~ Uni[0, 2 pi), plus a constant feature. The first R rows of a
  /// basis built with R' > R from the same seed coincide with this one.
  static FeatureBasis random_fourier(std::size_t T, double p_max, std::size_t R, std::uint64_t seed,
                                     double bandwidth = 1.0) {
    if (R == 0) throw DomainError("random-fourier basis needs at least one feature");
    FeatureBasis b(T, p_max);
    b.kind_ = BasisKind::random_fourier;
    b.K_ = R + 1;
    b.seed_ = seed;
    b.bandwidth_ = bandwidth;
    b.freq_.resize(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(T));
    b.phase_.resize(static_cast<Eigen::Index>(R));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
    const double scale = p_max > 0.0 ? bandwidth / p_max : bandwidth;
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t t = 0; t < T; ++t) b.freq_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = scale * normal(rng);
      b.phase_[static_cast<Eigen::Index>(r)] = uni(rng);
    }
    b.amp_ = std::sqrt(2.0 / static_cast<double>(R));
    return b;
  }

  /// A strictly richer basis whose leading features coincide with this one.
  FeatureBasis enlarged() const {
    if (kind_ == BasisKind::random_fourier) {
      return random_fourier(T_, p_max_, 2 * (K_ - 1), seed_, bandwidth_);
    }
    return polynomial(T_, p_max_, degree_ + 1);
  }

  BasisKind kind() const noexcept { return kind_; }
  std::size_t feature_count() const noexcept { return K_; }
  std::size_t horizon() const noexcept { return T_; }
  double p_max() const noexcept { return p_max_; }
  int degree() const noexcept { return degree_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double bandwidth() const noexcept { return bandwidth_; }

  bool in_box(const Vector& p, double tol = 1e-12) const {
    if (static_cast<std::size_t>(p.size()) != T_) return false;
    for (Eigen::Index t = 0; t < p.size(); ++t) {
      if (!(p[t] >= -tol && p[t] <= p_max_ + tol)) return false;
    }
    return true;
  }

  Vector eval(const Vector& p) const {
    require_box(p);
    return eval_unchecked(p);
  }

  /// K x T Jacobian d phi / d p.
  Matrix jacobian(const Vector& p) const {
    require_box(p);
    return jacobian_unchecked(p);
  }

  /// Evaluation without the box check; used for curvature probes that step
  /// slightly outside the box.
  Vector eval_unchecked(const Vector& p) const {
    const auto T = static_cast<Eigen::Index>(T_);
    Vector phi(static_cast<Eigen::Index>(K_));
    phi[0] = 1.0;
    if (kind_ == BasisKind::random_fourier) {
      phi.tail(phi.size() - 1) = amp_ * (freq_ * p + phase_).array().cos().matrix();
      return phi;
    }
    Vector power = p;
    for (int d = 0; d < degree_; ++d) {
      phi.segment(1 + d * T, T) = power;
      power = power.cwiseProduct(p);
    }
    return phi;
  }

  Matrix jacobian_unchecked(const Vector& p) const {
    const auto T = static_cast<Eigen::Index>(T_);
    Matrix J = Matrix::Zero(static_cast<Eigen::Index>(K_), T);
    if (kind_ == BasisKind::random_fourier) {
      const Vector s = (freq_ * p + phase_).array().sin().matrix();
      J.bottomRows(J.rows() - 1) = (-amp_ * s).asDiagonal() * freq_;
      return J;
    }
    // d/dp_t of p_t^(d+1) = (d+1) p_t^d
    Vector power = Vector::Ones(T);
    for (int d = 0; d < degree_; ++d) {
      for (Eigen::Index t = 0; t < T; ++t) J(1 + d * T + t, t) = (d + 1) * power[t];
      power = power.cwiseProduct(p);
    }
    return J;
  }

  /// Analytic constants valid on [0, p_max]^T.
  ///
  /// Diagonal polynomials: the Jacobian has one non-zero column pattern per
  /// hour, so its spectral norm is the largest column norm,
  /// sqrt(sum_d (d p^(d-1))^2), maximized at p = p_max. The Jacobian
  /// difference is diagonal per power, giving
  /// L_dphi <= sqrt(sum_{d>=2} (d (d-1) p_max^(d-2))^2).
  ///
  /// Random-fourier: ||J|| <= s ||W||_2 and
  /// ||J(p) - J(p')|| <= s max_r ||w_r|| ||W||_2 ||p - p'||.
  BasisConstants certify_constants() const {
    BasisConstants c;
    if (kind_ == BasisKind::random_fourier) {
      const double R = static_cast<double>(K_ - 1);
      c.phi_max = std::sqrt(1.0 + R * amp_ * amp_);
      Eigen::JacobiSVD<Matrix> svd(freq_);
      const double spec = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
      c.L_phi = amp_ * spec;
      c.L_dphi = amp_ * freq_.rowwise().norm().maxCoeff() * spec;
      return c;
    }
    const double T = static_cast<double>(T_);
    double norm2 = 1.0, col2 = 0.0, dcol2 = 0.0;
    for (int d = 1; d <= degree_; ++d) {
      norm2 += T * std::pow(p_max_, 2 * d);
      col2 += std::pow(d * std::pow(p_max_, d - 1), 2);
      if (d >= 2) dcol2 += std::pow(d * (d - 1) * std::pow(p_max_, d - 2), 2);
    }
    c.phi_max = std::sqrt(norm2);
    c.L_phi = std::sqrt(col2);
    c.L_dphi = std::sqrt(dcol2);
    return c;
  }

 private:
  FeatureBasis(std::size_t T, double p_max) : T_(T), p_max_(p_max) {
    if (T == 0) throw DomainError("basis horizon must be positive");
    if (!(p_max >= 0.0) || !std::isfinite(p_max)) throw DomainError("basis p_max must be finite and >= 0");
  }

  void require_box(const Vector& p) const {
    if (static_cast<std::size_t>(p.size()) != T_) {
      throw DomainError("price vector has length " + std::to_string(p.size()) + ", expected " +
                        std::to_string(T_));
    }
    if (!in_box(p)) throw DomainError("price vector outside [0, p_max]^T");
  }

  BasisKind kind_ = BasisKind::affine;
  std::size_t T_ = 0;
  std::size_t K_ = 0;
  double p_max_ = 0.0;
  int degree_ = 1;
  std::uint64_t seed_ = 0;
  double bandwidth_ = 1.0;
  double amp_ = 0.0;
  Matrix freq_;
  Vector phase_;
};

/// Free-function forms of the basis operations.
inline Vector eval(const FeatureBasis& basis, const PriceVector& p) { return basis.eval(p.values()); }
inline Matrix eval_jacobian(const FeatureBasis& basis, const PriceVector& p) { return basis.jacobian(p.values()); }

/// Constants for the basis rebuilt on a given box; T must match the basis.
inline BasisConstants certify_constants(const FeatureBasis& basis, double p_max, std::size_t T) {
  if (T != basis.horizon()) throw DomainError("certify_constants: horizon mismatch");
  if (p_max == basis.p_max()) return basis.certify_constants();
  if (basis.kind() == BasisKind::random_fourier) {
    // Frequencies are frozen in absolute units; only phi_max and the
    // Lipschitz constants matter, none of which depend on the box.
    return basis.certify_constants();
  }
  return FeatureBasis::polynomial(T, p_max, basis.degree()).certify_constants();
}

}  // namespace dragg

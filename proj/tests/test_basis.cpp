#include "dragg/basis.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dragg;

namespace {

Vector vec(std::initializer_list<double> v) { return Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size())); }

std::vector<FeatureBasis> zoo(std::size_t T, double p_max) {
  return {FeatureBasis::affine(T, p_max), FeatureBasis::quadratic_diagonal(T, p_max),
          FeatureBasis::polynomial(T, p_max, 4), FeatureBasis::random_fourier(T, p_max, 6, 42)};
}

Vector draw(std::mt19937_64& rng, std::size_t T, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector p(static_cast<Eigen::Index>(T));
  for (auto& x : p) x = u(rng);
  return p;
}

}  // namespace

TEST(Basis, AffineEvaluation) {
  const auto b = FeatureBasis::affine(2, 1.0);
  EXPECT_EQ(b.feature_count(), 3u);
  EXPECT_EQ(b.eval(vec({0.0, 0.0})), vec({1.0, 0.0, 0.0}));
  EXPECT_EQ(b.eval(vec({0.1, 0.3})), vec({1.0, 0.1, 0.3}));
  EXPECT_EQ(eval(b, PriceVector{0.1, 0.3}), vec({1.0, 0.1, 0.3}));
}

TEST(Basis, RandomFourierIsDeterministic) {
  const auto b = FeatureBasis::random_fourier(3, 0.5, 8, 11);
  const auto c = FeatureBasis::random_fourier(3, 0.5, 8, 11);
  const Vector p = vec({0.1, 0.2, 0.4});
  EXPECT_EQ(b.eval(p), b.eval(p));
  EXPECT_EQ(b.eval(p), c.eval(p));
  EXPECT_NE(b.eval(p), FeatureBasis::random_fourier(3, 0.5, 8, 12).eval(p));
}

TEST(Basis, OutOfBoxOrWrongLengthIsRejected) {
  const auto b = FeatureBasis::affine(2, 0.1);
  EXPECT_THROW(b.eval(vec({0.2, 0.0})), DomainError);
  EXPECT_THROW(b.eval(vec({-0.01, 0.0})), DomainError);
  EXPECT_THROW(b.eval(vec({0.0})), DomainError);
}

TEST(Basis, AffineJacobianIsConstant) {
  const auto b = FeatureBasis::affine(2, 1.0);
  Matrix expect(3, 2);
  expect << 0, 0, 1, 0, 0, 1;
  EXPECT_EQ(b.jacobian(vec({0.3, 0.9})), expect);
  EXPECT_EQ(eval_jacobian(b, PriceVector{0.0, 0.0}), expect);
}

TEST(Basis, QuadraticJacobianAtHalf) {
  const auto b = FeatureBasis::quadratic_diagonal(1, 1.0);
  EXPECT_EQ(b.eval(vec({0.5})), vec({1.0, 0.5, 0.25}));
  EXPECT_EQ(b.jacobian(vec({0.5})), vec({0.0, 1.0, 1.0}));
}

TEST(Basis, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (const auto& b : zoo(3, 0.8)) {
    for (int k = 0; k < 5; ++k) {
      const Vector p = draw(rng, 3, 0.05, 0.75);
      const Matrix fd = oracle::fd_jacobian([&](const Vector& q) { return b.eval_unchecked(q); }, p);
      const Matrix J = b.jacobian(p);
      EXPECT_LE((J - fd).norm(), 1e-5 * std::max(1.0, J.norm())) << to_string(b.kind());
    }
  }
}

TEST(Basis, CertifiedConstantsAffineExample) {
  const auto c = certify_constants(FeatureBasis::affine(2, 1.0), 0.1, 2);
  EXPECT_NEAR(c.phi_max, std::sqrt(1.02), 1e-15);
  EXPECT_NEAR(c.phi_max, 1.00995, 1e-5);
  EXPECT_DOUBLE_EQ(c.L_phi, 1.0);
  EXPECT_DOUBLE_EQ(c.L_dphi, 0.0);
  EXPECT_THROW(certify_constants(FeatureBasis::affine(2, 1.0), 0.1, 3), DomainError);
}

TEST(Basis, CertifiedConstantsQuadraticExample) {
  EXPECT_DOUBLE_EQ(FeatureBasis::quadratic_diagonal(1, 1.0).certify_constants().L_dphi, 2.0);
}

// Monte-Carlo audit of the certified constants: norms over samples, ratios
// over pairs, with the spectral norm of the Jacobian difference.
TEST(Basis, CertifiedConstantsDominateSampledRatios) {
  std::mt19937_64 rng(17);
  for (const double p_max : {0.05, 1.0, 2.0}) {
    for (const auto& b : zoo(2, p_max)) {
      const auto c = b.certify_constants();
      double phi = 0, lphi = 0, ldphi = 0;
      for (int k = 0; k < 10000; ++k) {
        const Vector p = draw(rng, 2, 0.0, p_max), q = draw(rng, 2, 0.0, p_max);
        const double dp = (p - q).norm();
        phi = std::max(phi, b.eval(p).norm());
        if (dp < 1e-12) continue;
        lphi = std::max(lphi, (b.eval(p) - b.eval(q)).norm() / dp);
        Eigen::JacobiSVD<Matrix> svd(b.jacobian(p) - b.jacobian(q));
        ldphi = std::max(ldphi, svd.singularValues()[0] / dp);
      }
      const double slack = 1.0 + 1e-12;
      EXPECT_LE(phi, c.phi_max * slack) << to_string(b.kind()) << " p_max=" << p_max;
      EXPECT_LE(lphi, c.L_phi * slack) << to_string(b.kind()) << " p_max=" << p_max;
      EXPECT_LE(ldphi, c.L_dphi * slack + 1e-12) << to_string(b.kind()) << " p_max=" << p_max;
    }
  }
}

TEST(Basis, EnlargedBasisExtendsTheFeatures) {
  const Vector p = vec({0.2, 0.7});
  const auto a = FeatureBasis::affine(2, 1.0);
  const auto q = a.enlarged();
  EXPECT_EQ(q.kind(), BasisKind::quadratic_diagonal);
  EXPECT_EQ(q.eval(p).head(3), a.eval(p));

  const auto r = FeatureBasis::random_fourier(2, 1.0, 4, 9);
  const auto r2 = r.enlarged();
  EXPECT_EQ(r2.feature_count(), 9u);
  // Same frequencies, amplitude sqrt(2/R) halves in square.
  EXPECT_NEAR((r2.eval(p).segment(1, 4) * std::sqrt(2.0) - r.eval(p).tail(4)).norm(), 0.0, 1e-14);
}

TEST(Basis, RejectsDegenerateConstruction) {
  EXPECT_THROW(FeatureBasis::affine(0, 1.0), DomainError);
  EXPECT_THROW(FeatureBasis::affine(2, -1.0), DomainError);
  EXPECT_THROW(FeatureBasis::polynomial(2, 1.0, 0), DomainError);
  EXPECT_THROW(FeatureBasis::random_fourier(2, 1.0, 0, 1), DomainError);
}

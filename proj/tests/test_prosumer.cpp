#include "dragg/prosumer.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dragg;

namespace {

Vector vec(std::initializer_list<double> v) { return Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size())); }

ProsumerProfile profile(Vector x0, double u, double a, double W) {
  ProsumerProfile p;
  p.id = "P";
  p.schedule = DemandVector(std::move(x0));
  p.u = u;
  p.a = a;
  p.W = W;
  return p;
}

oracle::Profile as_oracle(const ProsumerProfile& p) { return {p.schedule.values(), p.u, p.a, p.W}; }

ProsumerProfile random_profile(std::mt19937_64& rng, std::size_t T) {
  std::uniform_real_distribution<double> x(0.0, 2.0), u(0.05, 3.0), a(1.0, 3.0), f(0.0, 1.0);
  Vector x0(static_cast<Eigen::Index>(T));
  for (auto& v : x0) v = x(rng);
  x0[0] += 0.1;
  const double A = a(rng);
  return profile(x0, u(rng), A, f(rng) * A * x0.sum());
}

}  // namespace

TEST(BestResponse, FlatFlexibilityPinsSchedule) {
  const auto pr = profile(vec({1, 1}), 1, 1, 2);
  for (const auto& p : {vec({0.0, 0.0}), vec({0.3, 0.1}), vec({0.0, 0.9})}) {
    EXPECT_NEAR((best_response(pr, p).x.values() - vec({1, 1})).lpNorm<Eigen::Infinity>(), 0.0, 1e-12);
  }
}

TEST(BestResponse, InteriorHandExample) {
  const auto pr = profile(vec({1, 1}), 1, 2, 2);
  const auto br = best_response(pr, vec({0.2, 0.0}));
  EXPECT_NEAR(br.x[0], 0.95, 1e-12);
  EXPECT_NEAR(br.x[1], 1.05, 1e-12);
  EXPECT_NEAR(br.dual_nu, -0.1, 1e-12);
  EXPECT_EQ(br.active_set[0], Bound::interior);
  const auto o = oracle::brute_force_best_response(as_oracle(pr), vec({0.2, 0.0}), 1e-3);
  EXPECT_NEAR(o.x[0], 0.95, 1e-3);
}

TEST(BestResponse, ZeroScheduleHourIsPinned) {
  const auto pr = profile(vec({1, 0}), 1, 2, 1.5);
  const auto br = best_response(pr, vec({0.0, 0.0}));
  EXPECT_NEAR(br.x[0], 1.5, 1e-12);
  EXPECT_EQ(br.x[1], 0.0);
  const auto o = oracle::brute_force_best_response(as_oracle(pr), vec({0.0, 0.0}), 1e-3);
  EXPECT_NEAR((o.x - br.x.values()).lpNorm<Eigen::Infinity>(), 0.0, 1e-3);
}

TEST(BestResponse, ZeroTargetForcesZero) {
  const auto pr = profile(vec({1, 1}), 1, 2, 0);
  const auto br = best_response(pr, vec({0.1, 0.2}));
  EXPECT_EQ(br.x.values(), vec({0, 0}));
  const auto o = oracle::brute_force_best_response(as_oracle(pr), vec({0.1, 0.2}), 1e-3);
  EXPECT_NEAR(o.x.lpNorm<Eigen::Infinity>(), 0.0, 1e-12);
}

TEST(BestResponse, InfeasibleTargetThrows) {
  EXPECT_THROW(best_response(profile(vec({1, 1}), 1, 2, 4.5), vec({0, 0})), InfeasibleError);
  EXPECT_THROW(best_response(profile(vec({1, 1}), 1, 2, -0.1), vec({0, 0})), InfeasibleError);
  EXPECT_THROW(best_response(profile(vec({1, 1}), 1, 2, 1), vec({0})), DomainError);
}

TEST(Utility, HandExamples) {
  const auto pr = profile(vec({1, 1}), 1, 2, 2);
  EXPECT_EQ(prosumer_utility(pr, vec({1, 1}), vec({0.3, 0.7})), 0.0);
  EXPECT_NEAR(prosumer_utility(pr, vec({0.95, 1.05}), vec({0.2, 0})), 0.005, 1e-15);
  const auto one = profile(vec({1}), 1, 2, 1.5);
  EXPECT_NEAR(prosumer_utility(one, vec({1.5}), vec({0.1})), -0.30, 1e-15);
}

TEST(BestResponse, AgreesWithGridOracleOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> price(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const std::size_t T = k < 70 ? 2 : 3;
    const auto pr = random_profile(rng, T);
    Vector p(static_cast<Eigen::Index>(T));
    for (auto& v : p) v = price(rng);
    const auto br = best_response(pr, p);
    const double step = T == 2 ? 1e-3 : 1e-2;
    const auto o = oracle::brute_force_best_response(as_oracle(pr), p, step);
    EXPECT_GE(br.utility, o.utility - 1e-9) << "instance " << k;
    if (T == 2) EXPECT_LE((br.x.values() - o.x).lpNorm<Eigen::Infinity>(), step) << "instance " << k;
  }
}

TEST(BestResponse, BudgetBoxAndLocalOptimality) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> price(0.0, 0.5), unit(-1.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const std::size_t T = 2 + static_cast<std::size_t>(k % 23);
    const auto pr = random_profile(rng, T);
    Vector p(static_cast<Eigen::Index>(T));
    for (auto& v : p) v = price(rng);
    const auto br = best_response(pr, p);
    const Vector& x = br.x.values();
    const Vector& x0 = pr.schedule.values();
    EXPECT_LE(std::abs(x.sum() - pr.W), 1e-9);
    for (Eigen::Index t = 0; t < x.size(); ++t) {
      EXPECT_GE(x[t], 0.0);
      EXPECT_LE(x[t], pr.a * x0[t] + 1e-12);
    }
    // Feasible perturbations: move mass between two hours that have room.
    for (int r = 0; r < 1000; ++r) {
      const auto i = static_cast<Eigen::Index>(rng() % T), j = static_cast<Eigen::Index>(rng() % T);
      if (i == j) continue;
      const double room = std::min(x[i], pr.a * x0[j] - x[j]);
      if (room <= 0.0) continue;
      Vector y = x;
      const double s = room * 0.5 * (1.0 + unit(rng));
      y[i] -= s;
      y[j] += s;
      ASSERT_GE(br.utility, prosumer_utility(pr, y, p) - 1e-9);
    }
  }
}

TEST(BestResponse, BudgetIsMonotoneInDual) {
  std::mt19937_64 rng(7);
  const auto pr = random_profile(rng, 6);
  const Vector p = Vector::LinSpaced(6, 0.0, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (double nu = -10.0; nu <= 10.0; nu += 0.01) {
    const double s = budget_at(pr, p, nu);
    ASSERT_LE(s, prev + 1e-15);
    prev = s;
  }
}

TEST(BestResponse, LipschitzAuditIsFinite) {
  std::mt19937_64 rng(8);
  const auto pr = random_profile(rng, 4);
  std::mt19937_64 a(1), b(1);
  const double L1 = estimate_response_lipschitz(pr, 0.3, 200, a);
  const double L2 = estimate_response_lipschitz(pr, 0.3, 200, b);
  EXPECT_TRUE(std::isfinite(L1));
  EXPECT_EQ(L1, L2);
  // x(p) is the projection of x0 - p/(2u) shifted by nu; it cannot move faster than 1/(2u).
  EXPECT_LE(L1, 1.0 / (2.0 * pr.u) + 1e-6);
}

TEST(BestResponse, CheckResponseFlagsViolations) {
  const auto pr = profile(vec({1, 1}), 1, 2, 2);
  EXPECT_EQ(check_response(pr, vec({1, 1})), "");
  EXPECT_EQ(check_response(pr, vec({1, 1.1})), "budget violated");
  EXPECT_EQ(check_response(pr, vec({-0.5, 2.5})), "box violated at hour 1");
}

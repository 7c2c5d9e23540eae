#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dvscar/errors.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/random.hpp"

using namespace dvscar;

TEST(Latent, StationaryStatsClosedForm) {
  auto s = stationary_stats({0.5, 0.95, 0.15});
  EXPECT_NEAR(s.sn, 0.5 * std::sqrt(1.0 - 0.95 * 0.95) / 0.15, 1e-15);
  EXPECT_NEAR(s.avar, 0.0225 / (1.0 - 0.9025), 1e-15);
  EXPECT_THROW(stationary_stats({0.5, 1.0, 0.15}), DomainError);
  EXPECT_THROW(stationary_stats({0.5, 0.5, 0.0}), DomainError);
}

TEST(Latent, UnconstrainedRoundtrip) {
  for (ScarParams p : {ScarParams{0.5, 0.95, 0.15}, ScarParams{-1.2, -0.3, 2.0}, ScarParams{0.0, 0.0, 1e-3}}) {
    ScarParams q = from_unconstrained(to_unconstrained(p));
    EXPECT_NEAR(q.mu, p.mu, 1e-15);
    EXPECT_NEAR(q.phi, p.phi, 1e-15);
    EXPECT_NEAR(q.sigma, p.sigma, 1e-15 * p.sigma);
  }
  ScarParams edge = from_unconstrained({0.0, 40.0, -50.0});
  EXPECT_TRUE(edge.valid());
}

TEST(Latent, SimulatedPathHasStationaryMoments) {
  ScarParams p{0.5, 0.8, 0.3};
  const std::size_t T = 200000;
  auto lam = simulate_path(p, normal_vector(T, 17));
  double m = std::accumulate(lam.begin(), lam.end(), 0.0) / T;
  double v = 0.0, c1 = 0.0;
  for (std::size_t t = 0; t < T; ++t) v += (lam[t] - m) * (lam[t] - m);
  for (std::size_t t = 1; t < T; ++t) c1 += (lam[t] - m) * (lam[t - 1] - m);
  v /= T;
  c1 /= T;
  double avar = p.stationary_variance();
  // Long-run standard error of the mean is sqrt(avar (1+phi)/(1-phi) / T).
  EXPECT_NEAR(m, p.mu, 5.0 * std::sqrt(avar * 9.0 / T));
  EXPECT_NEAR(v, avar, 0.03 * avar);
  EXPECT_NEAR(c1 / v, p.phi, 0.01);
}

TEST(Latent, PathRecursionIsExact) {
  ScarParams p{0.2, 0.9, 0.1};
  std::vector<double> z{0.5, -1.0, 2.0, 0.0};
  auto lam = simulate_path(p, z);
  EXPECT_DOUBLE_EQ(lam[0], 0.2 + std::sqrt(p.stationary_variance()) * 0.5);
  for (std::size_t t = 1; t < z.size(); ++t)
    EXPECT_DOUBLE_EQ(lam[t], p.mu + p.phi * (lam[t - 1] - p.mu) + p.sigma * z[t]);
}

TEST(Random, DerivedSeedsAreDistinctAndStable) {
  EXPECT_EQ(derive_seed(1, {1, 2}), derive_seed(1, {1, 2}));
  EXPECT_NE(derive_seed(1, {1, 2}), derive_seed(1, {2, 1}));
  EXPECT_NE(derive_seed(1, {1, 2}), derive_seed(2, {1, 2}));
  EXPECT_NE(derive_seed(1, {1}), derive_seed(1, {1, 0}));
  auto a = normal_matrix(3, 4, 9), b = normal_matrix(3, 4, 9);
  EXPECT_EQ(a.values, b.values);
}

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dvscar/errors.hpp"
#include "dvscar/kendall.hpp"

using namespace dvscar;

namespace {

double brute_force_tau(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      int sx = (x[i] > x[j]) - (x[i] < x[j]);
      int sy = (y[i] > y[j]) - (y[i] < y[j]);
      s += sx * sy;
    }
  return s / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

TEST(Kendall, MatchesBruteForceWithoutTies) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (std::size_t n : {2u, 3u, 10u, 101u, 500u}) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = z(rng);
      y[i] = 0.6 * x[i] + z(rng);
    }
    EXPECT_NEAR(empirical_kendall_tau(x, y), brute_force_tau(x, y), 1e-14) << n;
  }
}

TEST(Kendall, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> small(0, 4);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(60), y(60);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = small(rng);
      y[i] = small(rng) + (rep % 2 ? x[i] : 0.0);
    }
    EXPECT_NEAR(empirical_kendall_tau(x, y), brute_force_tau(x, y), 1e-14);
  }
}

TEST(Kendall, KnownValuesAndErrors) {
  std::vector<double> a{1, 2, 3, 4}, b{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(empirical_kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(empirical_kendall_tau(a, b), -1.0);
  std::vector<double> c{3.0, 1.0, 2.0};
  std::vector<double> d{1.0, 2.0, 3.0};
  EXPECT_NEAR(empirical_kendall_tau(c, d), -1.0 / 3.0, 1e-15);
  std::vector<double> k{2, 2, 2};
  EXPECT_THROW(empirical_kendall_tau(k, d), DomainError);
  EXPECT_THROW(empirical_kendall_tau(a, d), std::invalid_argument);
}

TEST(Kendall, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> x(300), y(300), ex(300), cy(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = z(rng);
    y[i] = x[i] + z(rng);
    ex[i] = std::exp(x[i]);
    cy[i] = y[i] * y[i] * y[i];
  }
  EXPECT_DOUBLE_EQ(empirical_kendall_tau(x, y), empirical_kendall_tau(ex, cy));
}

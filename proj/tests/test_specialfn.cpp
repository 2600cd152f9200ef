#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "vofrac/specialfn.hpp"

TEST(Gamma, MatchesStdTgamma) {
  for (double x = 0.01; x < 170.0; x *= 1.07) {
    EXPECT_NEAR(vofrac::gamma(x) / std::tgamma(x), 1.0, 1e-13) << x;
  }
  EXPECT_EQ(vofrac::gamma(1.0), 1.0);
  EXPECT_NEAR(vofrac::gamma(2.0), 1.0, 4e-16);
  EXPECT_NEAR(vofrac::gamma(5.0), 24.0, 24.0 * 1e-15);
}

TEST(Gamma, HalfSquaredIsPi) {
  const double g = vofrac::gamma(0.5);
  EXPECT_NEAR(g * g, std::numbers::pi, 1e-12);
}

// Gamma(x+1) = x Gamma(x) on random points in (0.01, 160).
TEST(Property, GammaRecurrence) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> point(0.01, 160.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = point(rng);
    const double lhs = vofrac::gamma(x + 1.0);
    worst = std::max(worst, std::fabs(lhs - x * vofrac::gamma(x)) / lhs);
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Gamma, DomainAndOverflow) {
  EXPECT_THROW(vofrac::gamma(0.0), vofrac::DomainError);
  EXPECT_THROW(vofrac::gamma(-1.5), vofrac::DomainError);
  EXPECT_THROW(vofrac::gamma(std::nan("")), vofrac::DomainError);
  EXPECT_THROW(vofrac::gamma(172.0), std::overflow_error);
  EXPECT_THROW(vofrac::log_gamma(0.0), vofrac::DomainError);
}

TEST(LogGamma, MatchesStdLgamma) {
  for (double x = 0.001; x < 1e6; x *= 1.3) {
    EXPECT_NEAR(vofrac::log_gamma(x), std::lgamma(x), 1e-13 * std::max(1.0, std::fabs(std::lgamma(x))))
        << x;
  }
  EXPECT_EQ(vofrac::log_gamma(1.0), 0.0);
  EXPECT_EQ(vofrac::log_gamma(2.0), 0.0);
}

TEST(Kernel, ClosedForm) {
  EXPECT_EQ(vofrac::vo_kernel({2.0, 1.5, 1.0}), 1.0);
  EXPECT_EQ(vofrac::vo_kernel_at_distance(0.3, 1.0), 1.0);
  for (double alpha : {0.2, 0.5, 0.9, 1.7, 3.0}) {
    for (double d : {1e-8, 0.01, 0.5, 2.0}) {
      const double expected = std::pow(d, alpha - 1.0) / std::tgamma(alpha);
      EXPECT_NEAR(vofrac::vo_kernel_at_distance(d, alpha) / expected, 1.0, 1e-13);
      // t - s loses about eps/d relative accuracy to cancellation
      const double cancel = std::numeric_limits<double>::epsilon() / d * (std::fabs(alpha - 1.0) + 1.0);
      EXPECT_NEAR(vofrac::vo_kernel({1.0 + d, 1.0, alpha}) / expected, 1.0, 1e-13 + 4.0 * cancel);
    }
  }
}

TEST(Kernel, RejectsBadInputs) {
  EXPECT_THROW(vofrac::vo_kernel({1.0, 1.0, 0.5}), std::exception);
  EXPECT_THROW(vofrac::vo_kernel({1.0, 0.5, 0.0}), std::exception);
  EXPECT_THROW(vofrac::vo_kernel_at_distance(0.0, 0.5), std::exception);
}

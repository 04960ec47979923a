// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsyn/privacy/accountant.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dpsyn/errors.hpp"
#include "support/rdp_oracle.hpp"

namespace dpsyn::privacy {
namespace {

using ::dpsyn::testing::oracle_default_orders;
using ::dpsyn::testing::oracle_epsilon;
using ::dpsyn::testing::oracle_rdp;
using ::dpsyn::testing::HighPrecision;

TEST(RdpGaussianTest, Substitution) {
  EXPECT_DOUBLE_EQ(rdp_gaussian(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(rdp_gaussian(2, 10), 0.01);
  EXPECT_DOUBLE_EQ(rdp_gaussian(32, 4), 1.0);
}

TEST(RdpGaussianTest, RejectsBadDomain) {
  EXPECT_THROW(rdp_gaussian(1.0, 1.0), DomainError);
  EXPECT_THROW(rdp_gaussian(2.0, 0.0), DomainError);
}

TEST(RdpSubsampledGaussianTest, Endpoints) {
  EXPECT_EQ(rdp_subsampled_gaussian(2, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(rdp_subsampled_gaussian(2, 1.0, 1.0), 1.0);
}

TEST(RdpSubsampledGaussianTest, MatchesHighPrecisionOracleAtSmallRate) {
  // 60-digit evaluation of log(1 + q^2 (e - 1)) at q = 0.01.
  constexpr double kOracle = 1.7181342207454793e-4;
  EXPECT_NEAR(rdp_subsampled_gaussian(2, 0.01, 1.0), kOracle, 1e-12 * kOracle);
  const double direct = oracle_rdp(2, 0.01, 1.0).convert_to<double>();
  EXPECT_NEAR(direct, kOracle, 1e-15);
}

TEST(RdpSubsampledGaussianTest, RejectsBadDomain) {
  EXPECT_THROW(rdp_subsampled_gaussian(2.5, 0.1, 1.0), DomainError);
  EXPECT_THROW(rdp_subsampled_gaussian(1, 0.1, 1.0), DomainError);
  EXPECT_THROW(rdp_subsampled_gaussian(2, -0.1, 1.0), DomainError);
  EXPECT_THROW(rdp_subsampled_gaussian(2, 1.1, 1.0), DomainError);
  EXPECT_THROW(rdp_subsampled_gaussian(2, 0.5, 0.0), DomainError);
}

TEST(RdpSubsampledGaussianTest, LargeOrdersStayFinite) {
  const double v = rdp_subsampled_gaussian(512, 0.5, 0.3);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
}

TEST(RdpSubsampledGaussianTest, MonotoneInRateAndNoiseOnGrid) {
  const double rates[] = {0.0, 0.001, 0.01, 0.1, 1.0};
  const double sigmas[] = {0.5, 0.8, 1.0, 2.0, 8.0};
  const int orders[] = {2, 5, 16, 64, 512};
  for (int a : orders) {
    for (double s : sigmas) {
      double prev = -1.0;
      for (double q : rates) {
        const double v = rdp_subsampled_gaussian(a, q, s);
        EXPECT_GE(v, prev) << "a=" << a << " s=" << s << " q=" << q;
        EXPECT_LE(v, rdp_gaussian(a, s) * (1 + 1e-12));
        prev = v;
      }
    }
    for (double q : rates) {
      double prev = INFINITY;
      for (double s : sigmas) {
        const double v = rdp_subsampled_gaussian(a, q, s);
        EXPECT_LE(v, prev) << "a=" << a << " s=" << s << " q=" << q;
        prev = v;
      }
    }
  }
}

TEST(ComposeTest, ScalesLinearly) {
  const RdpCurve c({2, 3}, {0.1, 0.2});
  EXPECT_EQ(compose(c, 1).values(), (std::vector<double>{0.1, 0.2}));
  const auto ten = compose(c, 10).values();
  EXPECT_DOUBLE_EQ(ten[0], 1.0);
  EXPECT_DOUBLE_EQ(ten[1], 2.0);
  EXPECT_EQ(compose(RdpCurve({2}, {0.0}), 1000000).values()[0], 0.0);
  EXPECT_EQ(compose(c, 10).orders(), c.orders());
}

TEST(ComposeTest, IsAdditiveInSteps) {
  const auto c = rdp_curve(0.05, 1.3);
  for (auto [a, b] : {std::pair{1, 1}, {3, 7}, {100, 250}}) {
    const auto lhs = compose(c, a + b);
    const auto rhs = compose(c, a) + compose(c, b);
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-12 * lhs.values()[i]);
    }
  }
}

TEST(RdpCurveTest, RejectsBrokenInvariants) {
  EXPECT_THROW(RdpCurve({3, 2}, {0, 0}), DomainError);
  EXPECT_THROW(RdpCurve({1, 2}, {0, 0}), DomainError);
  EXPECT_THROW(RdpCurve({2}, {-1}), DomainError);
  EXPECT_THROW(RdpCurve({2, 3}, {0}), DomainError);
}

TEST(ToEpsilonDeltaTest, SingleGaussianRelease) {
  // Grid minimisation of a/2 + ln(1e5)/(a-1) over a = 2..64.
  std::vector<double> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  const auto curve = compose(rdp_curve(1.0, 1.0, orders), 1);
  const auto r = to_epsilon_delta(curve, 1e-5);
  EXPECT_NEAR(r.epsilon, 3.0 + std::log(1e5) / 5.0, 1e-12);
  EXPECT_NEAR(r.epsilon, 5.302585092994046, 1e-9);
  EXPECT_EQ(r.best_order, 6.0);
}

TEST(ToEpsilonDeltaTest, ZeroCurvePicksLargestOrder) {
  const auto r = to_epsilon_delta(RdpCurve::zeros(default_orders()), 0.5);
  EXPECT_EQ(r.best_order, 512.0);
  EXPECT_DOUBLE_EQ(r.epsilon, std::log(2.0) / 511.0);
}

TEST(ToEpsilonDeltaTest, MonotoneInValuesAndDelta) {
  const auto c = compose(rdp_curve(0.01, 1.0), 1000);
  const auto doubled = compose(c, 2);
  EXPECT_GE(to_epsilon_delta(doubled, 1e-5).epsilon,
            to_epsilon_delta(c, 1e-5).epsilon);
  double prev = INFINITY;
  for (double d : {1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 0.5}) {
    const double e = to_epsilon_delta(c, d).epsilon;
    EXPECT_LE(e, prev);
    prev = e;
  }
}

TEST(ToEpsilonDeltaTest, RejectsBadDelta) {
  const auto c = rdp_curve(0.01, 1.0);
  EXPECT_THROW(to_epsilon_delta(c, 0.0), DomainError);
  EXPECT_THROW(to_epsilon_delta(c, 1.0), DomainError);
  EXPECT_THROW(to_epsilon_delta(RdpCurve(), 0.1), DomainError);
}

TEST(AccountantOracleTest, AgreesWithHighPrecisionSumOnSmallGrid) {
  const auto orders = oracle_default_orders();
  for (double q : {0.01, 0.1}) {
    for (double s : {0.7, 2.0}) {
      for (std::int64_t t : {1, 500}) {
        const double expected = oracle_epsilon(q, s, t, 1e-5, orders);
        const double got = epsilon_for(s, q, t, 1e-5);
        EXPECT_NEAR(got, expected, 1e-6 * expected)
            << "q=" << q << " s=" << s << " t=" << t;
      }
    }
  }
}

TEST(CalibrateNoiseTest, InvertsTheSingleReleaseExample) {
  const double sigma = calibrate_noise({5.302585092994046, 1e-5}, 1.0, 1,
                                       [] {
                                         std::vector<double> o;
                                         for (int a = 2; a <= 64; ++a) o.push_back(a);
                                         return o;
                                       }());
  EXPECT_NEAR(sigma, 1.0, 0.01);
}

TEST(CalibrateNoiseTest, RoundTripWithinTwoPercent) {
  for (double target : {1.0, 3.0, 8.0}) {
    const double q = 0.032, delta = 5e-5;
    const std::int64_t steps = 250;
    const double sigma = calibrate_noise({target, delta}, q, steps);
    const double eps = epsilon_for(sigma, q, steps, delta);
    EXPECT_LE(eps, target);
    EXPECT_GT(eps, target * 0.98);
  }
}

TEST(CalibrateNoiseTest, MonotoneNonIncreasingInTarget) {
  double prev = INFINITY;
  for (double target : {0.5, 1.0, 2.0, 3.0, 8.0, 20.0}) {
    const double s = calibrate_noise({target, 1e-5}, 0.01, 1000);
    EXPECT_LE(s, prev);
    prev = s;
  }
}

TEST(CalibrateNoiseTest, UnsatisfiableTarget) {
  EXPECT_THROW(calibrate_noise({1e-9, 1e-5}, 0.5, 1000000), UnsatisfiableError);
}

TEST(CalibrateNoiseTest, RejectsNonPrivateTarget) {
  EXPECT_THROW(calibrate_noise(PrivacyBudget::non_private(), 0.1, 10), DomainError);
  EXPECT_THROW(calibrate_noise({1.0, 1e-5}, 0.0, 10), DomainError);
}

TEST(DefaultDeltaTest, Values) {
  EXPECT_NEAR(default_delta(42175), 2.3711e-6, 1e-10);
  EXPECT_DOUBLE_EQ(default_delta(1), 0.1);
  EXPECT_DOUBLE_EQ(default_delta(10), 0.01);
  EXPECT_THROW(default_delta(0), DomainError);
}

TEST(GroupPrivacyTest, Values) {
  const PrivacyBudget b{3.0, 1e-5};
  EXPECT_EQ(group_privacy(b, 1), b);
  const auto g = group_privacy(b, 2);
  EXPECT_DOUBLE_EQ(g.epsilon, 6.0);
  EXPECT_NEAR(g.delta, 2.0 * std::exp(3.0) * 1e-5, 1e-18);
  EXPECT_NEAR(g.delta, 4.01711e-4, 1e-9);
  const auto z = group_privacy({0.0, 0.1}, 3);
  EXPECT_EQ(z.epsilon, 0.0);
  EXPECT_NEAR(z.delta, 0.3, 1e-15);
}

TEST(GroupPrivacyTest, ClipsDeltaAtOneAndPassesInfinityThrough) {
  EXPECT_EQ(group_privacy({8.0, 1e-3}, 5).delta, 1.0);
  EXPECT_EQ(group_privacy(PrivacyBudget::non_private(), 7),
            PrivacyBudget::non_private());
  EXPECT_THROW(group_privacy({1.0, 1e-5}, 0), DomainError);
}

TEST(GroupPrivacyTest, IdentityForSingletonGroupsOnFiniteBudgets) {
  for (double e : {0.0, 0.5, 3.0, 8.0}) {
    for (double d : {0.0, 1e-9, 1e-5, 0.3}) {
      EXPECT_EQ(group_privacy({e, d}, 1), (PrivacyBudget{e, d}));
    }
  }
}

TEST(PrivacyBudgetTest, Validation) {
  EXPECT_NO_THROW((PrivacyBudget{3, 1e-5}.validate()));
  EXPECT_NO_THROW(PrivacyBudget::non_private().validate());
  EXPECT_THROW((PrivacyBudget{-1, 1e-5}.validate()), DomainError);
  EXPECT_THROW((PrivacyBudget{1, 1.0}.validate()), DomainError);
}

}  // namespace
}  // namespace dpsyn::privacy

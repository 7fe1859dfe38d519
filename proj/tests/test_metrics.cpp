#include <picnn/metrics.hpp>

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace picnn;

TEST(RSquared, IdentityIsOne)
{
  const std::vector<double> y{0.1, 0.5, 0.2, 0.9};
  EXPECT_DOUBLE_EQ(r_squared(y, y), 1.0);
}

TEST(RSquared, MeanPredictorIsZero)
{
  const std::vector<double> y{1.0, 2.0, 6.0};
  const std::vector<double> p(3, 3.0);
  EXPECT_NEAR(r_squared(p, y), 0.0, 1e-12);
}

TEST(RSquared, AntiCorrelatedToy)
{
  EXPECT_NEAR(r_squared(std::vector<double>{2, 1, 0}, std::vector<double>{0, 1, 2}), -3.0, 1e-12);
}

TEST(RSquared, ConstantTargetThrows)
{
  EXPECT_THROW(r_squared(std::vector<double>{1, 2}, std::vector<double>{3, 3}), DomainError);
}

TEST(RSquared, OneOnlyForExactMatch)
{
  const std::vector<double> y{0.0, 1.0, 2.0};
  std::vector<double> p = y;
  p[1] += 1e-6;
  EXPECT_LT(r_squared(p, y), 1.0);
}

TEST(Smape, IdentityIsZero)
{
  const std::vector<double> y{1.0, -2.0, 3.5};
  EXPECT_NEAR(smape(y, y), 0.0, 1e-12);
}

TEST(Smape, NegatedIsHundred)
{
  const std::vector<double> y{1.0, -2.0, 3.5};
  const std::vector<double> p{-1.0, 2.0, -3.5};
  EXPECT_NEAR(smape(p, y), 100.0, 1e-12);
}

TEST(Smape, HandExample)
{
  EXPECT_NEAR(smape(std::vector<double>{2, 2}, std::vector<double>{1, 2}), 50.0 / 3.0, 1e-12);
}

TEST(Smape, ZeroTargetsFiltered)
{
  std::size_t filtered = 0;
  const double v = smape(std::vector<double>{5, 2, 2}, std::vector<double>{0, 1, 2}, &filtered);
  EXPECT_EQ(filtered, 1u);
  EXPECT_NEAR(v, 50.0 / 3.0, 1e-12);
}

TEST(Smape, PredictedZeroCountsFully)
{
  EXPECT_NEAR(smape(std::vector<double>{0.0}, std::vector<double>{4.0}), 100.0, 1e-12);
}

TEST(Smape, AllZeroTargetsThrow)
{
  EXPECT_THROW(smape(std::vector<double>{1, 2}, std::vector<double>{0, 0}), DomainError);
}

TEST(Smape, SymmetricAndScaleInvariant)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(7), b(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
    }
    EXPECT_NEAR(smape(a, b), smape(b, a), 1e-12);
    std::vector<double> ka = a, kb = b;
    for (auto& v : ka)
      v *= 4.0;
    for (auto& v : kb)
      v *= 4.0;
    EXPECT_DOUBLE_EQ(smape(ka, kb), smape(a, b));
    const double s = smape(a, b);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 100.0);
  }
}

TEST(Metrics, ReportCountsPoints)
{
  const auto m = evaluate_metrics(std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{0.0, 1.0, 2.0});
  EXPECT_EQ(m.n_points, 3u);
  EXPECT_EQ(m.n_filtered_zero, 1u);
  EXPECT_DOUBLE_EQ(m.r_squared, 1.0);
  EXPECT_DOUBLE_EQ(m.smape, 0.0);
}

TEST(Metrics, LengthMismatchThrows)
{
  EXPECT_THROW(r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), DomainError);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "voterdyn/parallel.hpp"
#include "voterdyn/quadrature.hpp"
#include "voterdyn/stats.hpp"

using namespace voterdyn;

TEST(Stats, MeanAndSeExamples) {
  const std::vector<double> ones{1, 1, 1, 1};
  auto e = mean_and_se(ones);
  EXPECT_DOUBLE_EQ(e.value, 1.0);
  EXPECT_DOUBLE_EQ(e.std_error, 0.0);
  const std::vector<double> two{0, 2};
  e = mean_and_se(two);
  EXPECT_DOUBLE_EQ(e.value, 1.0);
  EXPECT_DOUBLE_EQ(e.std_error, 1.0);
  EXPECT_EQ(e.replications, 2u);
  const std::vector<double> one{3};
  EXPECT_THROW(mean_and_se(one), RangeError);
}

TEST(Stats, NormalMeanProperty) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::vector<double> x(100000);
  for (auto& v : x) v = normal(gen);
  EXPECT_NEAR(mean_and_se(x).value, 0.0, 3.0 / std::sqrt(1e5));
}

TEST(Stats, PairwiseSummationAccuracy) {
  std::vector<double> x(1000000, 0.1);
  EXPECT_NEAR(pairwise_sum(x) / 1e5, 1.0, 1e-12);
}

TEST(Stats, CovarianceMatrixBasics) {
  std::vector<std::vector<double>> same(10, std::vector<double>{1.0, -2.0, 3.0});
  const auto z = covariance_matrix(same);
  for (double v : z.values) EXPECT_EQ(v, 0.0);

  std::mt19937_64 gen(2);
  std::vector<std::vector<double>> coins(100000);
  for (auto& row : coins) row = {(gen() & 1) ? 1.0 : -1.0, (gen() & 1) ? 1.0 : -1.0};
  const auto c = covariance_matrix(coins);
  EXPECT_NEAR(c(0, 1), 0.0, 3.0 * c.se(0, 1));
  EXPECT_NEAR(c(0, 0), 1.0, 0.01);
  EXPECT_THROW(covariance_matrix({{1.0, 2.0}, {1.0}}), RangeError);
}

TEST(Stats, CovarianceEquivarianceAndPermutation) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> x(500);
  for (auto& row : x) {
    const double a = normal(gen);
    row = {a, 0.5 * a + normal(gen), normal(gen)};
  }
  const auto base = covariance_matrix(x);
  auto scaled = x;
  for (auto& row : scaled)
    for (auto& v : row) v = 3.0 * v + 7.0;
  const auto s = covariance_matrix(scaled);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(s.values[k], 9.0 * base.values[k], 1e-10 * (1 + std::fabs(base.values[k])));
  auto shuffled = x;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto p = covariance_matrix(shuffled);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(p.values[k], base.values[k], 1e-12);
  // Positive semidefinite: all principal 2x2 minors and the determinant.
  const auto& m = base.values;
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  EXPECT_GE(det, -1e-12);
  EXPECT_GE(m[0] * m[4] - m[1] * m[3], -1e-12);
}

TEST(Stats, GaussianPassesDiagnostics) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> x(10000);
  for (auto& row : x) row = {normal(gen), normal(gen)};
  const auto rep = normality_diagnostics(x, std::vector<double>{1, 0, 0, 1}, 50);
  for (const auto& c : rep.coordinates) {
    EXPECT_LT(std::fabs(c.skewness), 3 * std::sqrt(6.0 / 1e4));
    EXPECT_LT(std::fabs(c.excess_kurtosis), 3 * std::sqrt(24.0 / 1e4));
    EXPECT_GT(c.qq_correlation, 0.999);
    EXPECT_LE(c.qq_correlation, 1.0);
  }
  EXPECT_TRUE(rep.passes());
  ASSERT_TRUE(rep.covariance_distance.has_value());
  EXPECT_GE(*rep.covariance_distance, 0.0);
  EXPECT_LT(*rep.covariance_distance, 0.1);
  EXPECT_GT(*rep.covariance_distance_se, 0.0);
}

TEST(Stats, ExponentialFailsDiagnostics) {
  std::mt19937_64 gen(5);
  std::exponential_distribution<double> expo;
  std::vector<std::vector<double>> x(10000);
  for (auto& row : x) row = {expo(gen)};
  const auto rep = normality_diagnostics(x);
  EXPECT_NEAR(rep.coordinates[0].skewness, 2.0, 0.25);
  EXPECT_LT(rep.coordinates[0].qq_correlation, 0.99);
  EXPECT_FALSE(rep.passes());
}

TEST(Stats, DegenerateSamples) {
  std::vector<std::vector<double>> x(300, std::vector<double>{2.5});
  const auto rep = normality_diagnostics(x);
  EXPECT_TRUE(rep.degenerate);
  EXPECT_FALSE(rep.passes());
  std::vector<std::vector<double>> small(100, std::vector<double>{1.0});
  EXPECT_THROW(normality_diagnostics(small), RangeError);
}

TEST(Stats, GaussianMetaTrials) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> normal;
  int passes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> x(5000);
    for (auto& row : x) row = {normal(gen)};
    passes += normality_diagnostics(x).passes() ? 1 : 0;
  }
  EXPECT_GE(passes, 99);
}

TEST(Quadrature, SmoothIntegrands) {
  EXPECT_NEAR(integrate([](double x) { return std::exp(x); }, 0.0, 1.0), std::exp(1.0) - 1.0, 1e-8);
  EXPECT_NEAR(integrate([](double x) { return std::exp(-(3.0 - x)) * x * x; }, 0.0, 3.0),
              9.0 - 2.0 * 3.0 + 2.0 - 2.0 * std::exp(-3.0), 1e-8);
  EXPECT_EQ(integrate([](double) { return 1.0; }, 2.0, 2.0), 0.0);
  EXPECT_THROW(integrate([](double x) { return std::sin(1.0 / (x + 1e-6)); }, 0.0, 1.0, 1e-12, 4), NumericError);
}

TEST(Parallel, ResultsIndependentOfWorkers) {
  auto fn = [](std::size_t i) { return std::sqrt(static_cast<double>(i)) * 1.5; };
  const auto a = parallel_map<double>(1000, 1, fn);
  const auto b = parallel_map<double>(1000, 4, fn);
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 37) throw RangeError("boom");
                            }),
               RangeError);
}

TEST(Parallel, WorkerResolution) {
  EXPECT_EQ(resolve_workers(3), 3u);
  ::setenv("VOTERDYN_WORKERS", "5", 1);
  EXPECT_EQ(resolve_workers(0), 5u);
  ::setenv("VOTERDYN_WORKERS", "zero", 1);
  EXPECT_THROW(resolve_workers(0), ConfigError);
  ::unsetenv("VOTERDYN_WORKERS");
  EXPECT_GE(resolve_workers(0), 1u);
}

#include "confshift/conformal_pvalues.hpp"
#include "confshift/errors.hpp"
#include "confshift/evaluation.hpp"
#include "confshift/random.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace confshift;

namespace {

const std::vector<double> four = { 1, 2, 3, 4 };
const std::vector<double> ones4 = { 1, 1, 1, 1 };

struct Config
{
  std::vector<double> scores;
  std::vector<double> weights;
};

Config
random_config(Rng& rng, std::size_t n, bool ties)
{
  Config c;
  for (std::size_t i = 0; i < n; ++i) {
    c.scores.push_back(ties ? std::floor(4.0 * rng.uniform()) : rng.normal());
    c.weights.push_back(std::exp(rng.normal(0.0, 1.0)));
  }
  return c;
}

} // namespace

TEST(DiscretePValue, HandValues)
{
  EXPECT_DOUBLE_EQ(discrete_pvalue(four, ones4, 2.5, 1.0), 0.6);
  EXPECT_DOUBLE_EQ(discrete_pvalue(four, ones4, 9.0, 1.0), 0.2);
  EXPECT_DOUBLE_EQ(discrete_pvalue(four, ones4, 0.0, 1.0), 1.0);
}

TEST(DiscretePValue, TiesCountAsExceedances)
{
  EXPECT_DOUBLE_EQ(discrete_pvalue(four, ones4, 3.0, 1.0), 0.6);
}

TEST(DiscretePValue, MatchesOracleOnRandomInputs)
{
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto c = random_config(rng, 1 + rng.uniform_index(40), t % 2 == 0);
    const double s = rng.normal();
    const double w = std::exp(rng.normal());
    EXPECT_NEAR(discrete_pvalue(c.scores, c.weights, s, w), oracle::discrete_p(c.scores, c.weights, s, w), 1e-13);
  }
}

TEST(DiscretePValue, FloorIsExactAboveMaximum)
{
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto c = random_config(rng, 25, false);
    const double w = std::exp(rng.normal());
    const double total = static_cast<double>(oracle::sum(c.weights)) + w;
    EXPECT_NEAR(discrete_pvalue(c.scores, c.weights, 100.0, w), w / total, 1e-15);
  }
}

TEST(DiscretePValue, NonincreasingInScore)
{
  Rng rng(3);
  const auto c = random_config(rng, 30, true);
  double prev = 1.0;
  for (double s = -3.0; s <= 5.0; s += 0.05) {
    const double p = discrete_pvalue(c.scores, c.weights, s, 0.7);
    EXPECT_LE(p, prev + 1e-15);
    prev = p;
  }
}

TEST(DiscretePValue, ScaleInvariant)
{
  Rng rng(4);
  const auto c = random_config(rng, 20, true);
  for (double k : { 1e-3, 0.5, 7.0, 1e4 }) {
    std::vector<double> scaled = c.weights;
    for (auto& w : scaled)
      w *= k;
    for (double s : { -1.0, 0.0, 1.0, 2.0, 3.0 }) {
      EXPECT_NEAR(discrete_pvalue(c.scores, scaled, s, 1.3 * k), discrete_pvalue(c.scores, c.weights, s, 1.3), 1e-13);
      EXPECT_NEAR(randomized_pvalue(c.scores, scaled, s, 1.3 * k, 0.37),
                  randomized_pvalue(c.scores, c.weights, s, 1.3, 0.37),
                  1e-13);
    }
  }
}

TEST(DiscretePValue, UnitWeightsGiveClassicRankPValue)
{
  Rng rng(5);
  std::vector<double> calib(49);
  for (auto& s : calib)
    s = rng.normal();
  const auto w = unit_weights(calib.size());
  for (int t = 0; t < 50; ++t) {
    const double s = rng.normal();
    const auto at_or_above = std::count_if(calib.begin(), calib.end(), [&](double c) { return c >= s; });
    EXPECT_NEAR(discrete_pvalue(calib, w, s, 1.0), static_cast<double>(at_or_above + 1) / 50.0, 1e-15);
  }
}

TEST(DiscretePValue, Errors)
{
  const std::vector<double> empty;
  EXPECT_THROW(discrete_pvalue(empty, empty, 1.0, 1.0), DomainError);
  const std::vector<double> bad = { 1, -1, 1, 1 };
  EXPECT_THROW(discrete_pvalue(four, bad, 1.0, 1.0), DomainError);
  EXPECT_THROW(discrete_pvalue(four, ones4, 1.0, 0.0), DomainError);
  EXPECT_THROW(discrete_pvalue(four, ones4, NAN, 1.0), DomainError);
}

TEST(RandomizedPValue, HandValues)
{
  EXPECT_DOUBLE_EQ(randomized_pvalue(four, ones4, 9.0, 1.0, 0.5), 0.1);
  // strictly between 2 and 3 with u = 0: only the strict exceedances
  EXPECT_DOUBLE_EQ(randomized_pvalue(four, ones4, 2.5, 1.0, 0.0), 2.0 / 5.0);
}

TEST(RandomizedPValue, UpperEndpointEqualsDiscrete)
{
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto c = random_config(rng, 1 + rng.uniform_index(30), true);
    const double s = std::floor(4.0 * rng.uniform());
    const double w = std::exp(rng.normal());
    EXPECT_NEAR(randomized_pvalue(c.scores, c.weights, s, w, 1.0), discrete_pvalue(c.scores, c.weights, s, w), 1e-14);
  }
}

TEST(RandomizedPValue, MatchesOracleWithTies)
{
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto c = random_config(rng, 1 + rng.uniform_index(30), true);
    const double s = std::floor(4.0 * rng.uniform());
    const double w = std::exp(rng.normal());
    const double u = rng.uniform();
    EXPECT_NEAR(randomized_pvalue(c.scores, c.weights, s, w, u), oracle::randomized_p(c.scores, c.weights, s, w, u), 1e-13);
  }
}

TEST(RandomizedPValue, RejectsUOutsideUnitInterval)
{
  EXPECT_THROW(randomized_pvalue(four, ones4, 1.0, 1.0, 1.5), DomainError);
  EXPECT_THROW(randomized_pvalue(four, ones4, 1.0, 1.0, -0.1), DomainError);
}

TEST(RandomizedPValue, SweepsTheDiagnosticInterval)
{
  const std::vector<double> scores = { 1, 2, 2, 3, 5 };
  const std::vector<double> weights = { 0.5, 1.0, 2.0, 0.25, 3.0 };
  const std::vector<std::size_t> none;
  const auto d = tail_diagnostics(scores, weights, 2.0, 0.8, 10, 0.1, none);
  EXPECT_NEAR(randomized_pvalue(scores, weights, 2.0, 0.8, 0.0), d.lower, 1e-15);
  EXPECT_NEAR(randomized_pvalue(scores, weights, 2.0, 0.8, 1.0), d.lower + d.width, 1e-15);
  EXPECT_NEAR(d.width, (0.8 + 3.0) / 7.55, 1e-15);
}

TEST(RandomizedPValue, ConditionalVarianceMatchesTwelfthRule)
{
  const std::vector<double> scores = { 0.1, 0.7, 0.7, 1.4, 2.0, 2.0, 2.0 };
  const std::vector<double> weights = { 1.0, 0.3, 2.2, 0.9, 0.4, 0.4, 1.7 };
  const std::vector<std::size_t> none;
  const auto d = tail_diagnostics(scores, weights, 0.7, 1.1, 10, 0.1, none);
  EXPECT_DOUBLE_EQ(d.cond_variance, d.width * d.width / 12.0);

  Rng rng(8);
  const std::size_t draws = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double p = randomized_pvalue(scores, weights, 0.7, 1.1, rng.uniform());
    sum += p;
    sum_sq += p * p;
  }
  const double mean = sum / draws;
  const double var = (sum_sq - draws * mean * mean) / (draws - 1);
  EXPECT_NEAR(var / d.cond_variance, 1.0, 0.02);
}

TEST(RandomizedPValue, BatchSeededAndReproducible)
{
  const std::vector<double> test = { 0.5, 2.5, 9.0 };
  const std::vector<double> tw = { 1, 1, 1 };
  const auto a = randomized_pvalues(four, ones4, test, tw, std::uint64_t{ 42 });
  const auto b = randomized_pvalues(four, ones4, test, tw, std::uint64_t{ 42 });
  const auto c = randomized_pvalues(four, ones4, test, tw, std::uint64_t{ 43 });
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_EQ(a.method, PValueMethod::randomized);
  ASSERT_TRUE(a.seed.has_value());
  EXPECT_EQ(*a.seed, 42u);

  Rng rng(42);
  for (std::size_t j = 0; j < test.size(); ++j)
    EXPECT_DOUBLE_EQ(a.values[j], randomized_pvalue(four, ones4, test[j], 1.0, rng.uniform()));
}

TEST(TailDiagnostics, DetectabilityRatio)
{
  const std::vector<std::size_t> r = { 1, 5 };
  const auto d = tail_diagnostics(four, ones4, 9.0, 1.0, 10, 0.1, r);
  EXPECT_DOUBLE_EQ(d.floor, 0.2);
  EXPECT_NEAR(d.detectability.at(1), 20.0, 1e-12);
  EXPECT_NEAR(d.detectability.at(5), 4.0, 1e-12);
}

TEST(TailDiagnostics, NoTiesWidthEqualsFloor)
{
  const std::vector<std::size_t> none;
  const auto d = tail_diagnostics(four, ones4, 2.5, 1.0, 10, 0.1, none);
  EXPECT_EQ(d.width, d.floor);
  EXPECT_DOUBLE_EQ(d.cond_variance, d.floor * d.floor / 12.0);
  EXPECT_GT(d.floor, 0.0);
  EXPECT_LE(d.width, 1.0);
}

TEST(TailDiagnostics, DetectabilityAboveOneBlocksRejection)
{
  Rng rng(9);
  const std::size_t m = 20;
  const double alpha = 0.1;
  std::vector<std::size_t> r_set(m);
  for (std::size_t r = 0; r < m; ++r)
    r_set[r] = r + 1;
  for (int t = 0; t < 300; ++t) {
    const auto c = random_config(rng, 1 + rng.uniform_index(15), false);
    const double w = std::exp(rng.normal(0.0, 2.0));
    const auto d = tail_diagnostics(c.scores, c.weights, 1e3, w, m, alpha, r_set);
    const double p = discrete_pvalue(c.scores, c.weights, 1e3, w);
    for (auto [r, delta] : d.detectability)
      if (delta > 1.0)
        EXPECT_GT(p, static_cast<double>(r) / m * alpha);
  }
}

TEST(TailDiagnostics, Preconditions)
{
  const std::vector<std::size_t> zero = { 0 }, big = { 11 }, ok = { 1 };
  EXPECT_THROW(tail_diagnostics(four, ones4, 1.0, 1.0, 10, 0.1, zero), DomainError);
  EXPECT_THROW(tail_diagnostics(four, ones4, 1.0, 1.0, 10, 0.1, big), DomainError);
  EXPECT_THROW(tail_diagnostics(four, ones4, 1.0, 1.0, 10, 1.0, ok), DomainError);
}

TEST(NullCalibration, DiscreteIsSuperUniform)
{
  Rng rng(10);
  const std::size_t n = 19, trials = 20000;
  const auto w = unit_weights(n);
  std::vector<double> p(trials), calib(n);
  for (auto& v : p) {
    for (auto& s : calib)
      s = rng.normal();
    v = discrete_pvalue(calib, w, rng.normal(), 1.0);
  }
  for (const auto& pt : superuniformity_curve(p, percent_grid())) {
    const double se = std::sqrt(pt.u * (1.0 - pt.u) / trials);
    EXPECT_LE(pt.cdf, pt.u + 3.0 * se) << pt.u;
  }
}

TEST(NullCalibration, RandomizedIsUniform)
{
  Rng rng(11);
  const std::size_t n = 30, trials = 10000, meta = 20;
  const auto w = unit_weights(n);
  std::vector<double> calib(n), p(trials);
  std::size_t passed = 0;
  for (std::size_t k = 0; k < meta; ++k) {
    for (auto& v : p) {
      for (auto& s : calib)
        s = rng.normal();
      v = randomized_pvalue(calib, w, rng.normal(), 1.0, rng.uniform());
    }
    if (ks_pvalue(ks_statistic_uniform(p), p.size()) > 0.01)
      ++passed;
  }
  EXPECT_GE(passed, 19u);
}

#include "confshift/classifier.hpp"
#include "confshift/errors.hpp"
#include "confshift/random.hpp"
#include "confshift/shift_weights.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace confshift;

namespace {

FeatureMatrix
gaussian(std::size_t n, std::size_t d, double mean, std::uint64_t seed)
{
  Rng rng(seed);
  FeatureMatrix x(0, d);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row)
      v = rng.normal(mean, 1.0);
    x.append_row(row);
  }
  return x;
}

FeatureMatrix
constant_column(std::size_t n, double v)
{
  return FeatureMatrix(n, 1, std::vector<double>(n, v));
}

} // namespace

TEST(OddsWeight, HandValues)
{
  EXPECT_DOUBLE_EQ(odds_weight(0.5, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(odds_weight(0.8, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(odds_weight(0.5, 2.0), 2.0);
}

TEST(Classifier, IdenticalDistributionsPredictClassPrior)
{
  const auto calib = gaussian(500, 2, 0.0, 1);
  const auto test = gaussian(300, 2, 0.0, 2);
  const auto held_out = gaussian(400, 2, 0.0, 3);
  const double prior = 300.0 / 800.0;
  for (auto kind : { ClassifierKind::logistic, ClassifierKind::forest }) {
    const auto model = fit_probabilistic_classifier(calib, test, kind, 7);
    double mean = 0.0;
    for (std::size_t i = 0; i < held_out.rows(); ++i)
      mean += model.predict(held_out.row(i)) / static_cast<double>(held_out.rows());
    EXPECT_NEAR(mean, prior, 0.1) << to_string(kind);
  }
}

TEST(Classifier, SeparatedClassesGiveConfidentPredictions)
{
  FeatureMatrix calib(0, 1), test(0, 1);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> a = { -5.0 - 0.01 * i }, b = { 5.0 + 0.01 * i };
    calib.append_row(a);
    test.append_row(b);
  }
  const std::vector<double> left = { -5.2 }, right = { 5.2 };
  for (auto kind : { ClassifierKind::logistic, ClassifierKind::forest }) {
    const auto model = fit_probabilistic_classifier(calib, test, kind, 3);
    EXPECT_LT(model.predict(left), 0.1) << to_string(kind);
    EXPECT_GT(model.predict(right), 0.9) << to_string(kind);
    EXPECT_GE(model.predict(left), ClassifierModel::p_min);
    EXPECT_LE(model.predict(right), 1.0 - ClassifierModel::p_min);
  }
}

TEST(Classifier, ConstantFeatureGivesClassPrior)
{
  const auto calib = constant_column(60, 1.0);
  const auto test = constant_column(40, 1.0);
  const std::vector<double> z = { 1.0 };
  for (auto kind : { ClassifierKind::logistic, ClassifierKind::forest }) {
    const auto model = fit_probabilistic_classifier(calib, test, kind, 5);
    // the forest sees bootstrap class fractions, which wander slightly
    EXPECT_NEAR(model.predict(z), 0.4, kind == ClassifierKind::logistic ? 0.02 : 0.05) << to_string(kind);
  }
}

TEST(Classifier, ClampsExtremeProbabilities)
{
  FeatureMatrix calib(0, 1), test(0, 1);
  for (int i = 0; i < 30; ++i) {
    const std::vector<double> a = { -1.0 - i }, b = { 1.0 + i };
    calib.append_row(a);
    test.append_row(b);
  }
  const auto model = fit_probabilistic_classifier(calib, test, ClassifierKind::forest, 1);
  const std::vector<double> far = { 1e6 };
  EXPECT_EQ(model.predict(far), 1.0 - ClassifierModel::p_min);
  EXPECT_TRUE(std::isfinite(estimate_weights_single(model, far, 1.0)));
}

TEST(Classifier, DeterministicGivenSeed)
{
  const auto calib = gaussian(80, 3, 0.0, 1);
  const auto test = gaussian(80, 3, 0.5, 2);
  const auto a = fit_probabilistic_classifier(calib, test, ClassifierKind::forest, 11);
  const auto b = fit_probabilistic_classifier(calib, test, ClassifierKind::forest, 11);
  for (std::size_t i = 0; i < test.rows(); ++i)
    EXPECT_EQ(a.predict(test.row(i)), b.predict(test.row(i)));
}

TEST(Classifier, RejectsMismatchedColumns)
{
  EXPECT_THROW(fit_probabilistic_classifier(gaussian(5, 2, 0, 1), gaussian(5, 3, 0, 2), ClassifierKind::logistic, 0),
               ConfigError);
  EXPECT_THROW(fit_probabilistic_classifier(FeatureMatrix(0, 2), gaussian(5, 2, 0, 2), ClassifierKind::logistic, 0),
               ConfigError);
}

TEST(Classifier, SwappingClassesGivesReciprocalWeights)
{
  const auto calib = gaussian(120, 2, 0.0, 4);
  const auto test = gaussian(80, 2, 0.4, 5);
  const auto fwd = fit_probabilistic_classifier(calib, test, ClassifierKind::logistic, 0);
  const auto rev = fit_probabilistic_classifier(test, calib, ClassifierKind::logistic, 0);
  for (std::size_t i = 0; i < calib.rows(); ++i) {
    const double w = estimate_weights_single(fwd, calib.row(i), fwd.prior_ratio());
    const double w_rev = estimate_weights_single(rev, calib.row(i), rev.prior_ratio());
    EXPECT_NEAR(w * w_rev, 1.0, 1e-6);
  }
}

TEST(GeometricAggregate, HandValues)
{
  const auto agg = geometric_aggregate({ { 1.0, 2.0 }, { 4.0, 8.0 } });
  EXPECT_NEAR(agg[0], 2.0, 1e-12);
  EXPECT_NEAR(agg[1], 4.0, 1e-12);
}

TEST(GeometricAggregate, CommutesWithReciprocal)
{
  Rng rng(9);
  std::vector<std::vector<double>> w(7, std::vector<double>(20)), inv = w;
  for (std::size_t b = 0; b < 7; ++b)
    for (std::size_t i = 0; i < 20; ++i) {
      w[b][i] = std::exp(rng.normal(0.0, 2.0));
      inv[b][i] = 1.0 / w[b][i];
    }
  const auto a = geometric_aggregate(w);
  const auto r = geometric_aggregate(inv);
  for (std::size_t i = 0; i < 20; ++i)
    EXPECT_NEAR(a[i] * r[i], 1.0, 1e-12);
}

TEST(GeometricAggregate, RejectsNonPositive)
{
  EXPECT_THROW(geometric_aggregate({ { 1.0, 0.0 } }), DomainError);
  EXPECT_THROW(geometric_aggregate({}), ConfigError);
}

TEST(Winsorization, InterpolatedBounds)
{
  const std::vector<double> w = { 10, 3, 1, 7, 2, 9, 4, 8, 5, 6 };
  const auto b = winsorization_bounds(w, 0.1);
  EXPECT_NEAR(b.lo, 1.9, 1e-12);
  EXPECT_NEAR(b.hi, 9.1, 1e-12);
  EXPECT_NEAR(b.lo, oracle::quantile7(w, 0.1), 1e-12);
}

TEST(Winsorization, QuantileMatchesOracle)
{
  Rng rng(2);
  std::vector<double> v(37);
  for (auto& x : v)
    x = rng.normal();
  for (double q : { 0.0, 0.05, 0.33, 0.5, 0.9, 1.0 })
    EXPECT_NEAR(empirical_quantile(v, q), oracle::quantile7(v, q), 1e-12) << q;
}

TEST(Winsorization, Idempotent)
{
  Rng rng(3);
  std::vector<double> v(50);
  for (auto& x : v)
    x = std::exp(rng.normal());
  const auto b = winsorization_bounds(v, 0.05);
  const auto once = winsorize(v, b);
  EXPECT_EQ(winsorize(once, b), once);
  for (double x : once) {
    EXPECT_GE(x, b.lo);
    EXPECT_LE(x, b.hi);
  }
}

TEST(Winsorization, RejectsBadGamma)
{
  const std::vector<double> v = { 1, 2, 3 };
  EXPECT_THROW(winsorization_bounds(v, 0.5), ConfigError);
  EXPECT_THROW(winsorization_bounds(v, -0.1), ConfigError);
}

TEST(BalancedReplica, SizesAndRanges)
{
  const auto r = balanced_replica(30, 12, 5, 0);
  EXPECT_EQ(r.calib_rows.size(), 12u);
  EXPECT_EQ(r.test_rows.size(), 12u);
  for (auto i : r.calib_rows)
    EXPECT_LT(i, 30u);
  for (auto i : r.test_rows)
    EXPECT_LT(i, 12u);
  EXPECT_NE(balanced_replica(30, 12, 5, 1).calib_rows, r.calib_rows);
}

TEST(BaggedWeights, SingleReplicaWithoutClippingIsSingleModelOdds)
{
  const auto calib = gaussian(40, 2, 0.0, 1);
  const auto test = gaussian(25, 2, 0.5, 2);
  const std::uint64_t seed = 17;
  const auto profile = bagged_weights(calib, test, 1, 0.0, ClassifierKind::forest, seed);

  const auto rep = balanced_replica(40, 25, seed, 0);
  const auto model = fit_probabilistic_classifier(calib.select_rows(rep.calib_rows),
                                                  test.select_rows(rep.test_rows),
                                                  ClassifierKind::forest,
                                                  replica_classifier_seed(seed, 0));
  EXPECT_DOUBLE_EQ(model.prior_ratio(), 1.0);
  for (std::size_t i = 0; i < calib.rows(); ++i)
    EXPECT_NEAR(profile.calib_weights[i], estimate_weights_single(model, calib.row(i), 1.0), 1e-12);
  for (std::size_t i = 0; i < test.rows(); ++i)
    EXPECT_NEAR(profile.test_weights[i], estimate_weights_single(model, test.row(i), 1.0), 1e-12);
}

TEST(BaggedWeights, ProfileInvariants)
{
  const auto calib = gaussian(60, 3, 0.0, 1);
  const auto test = gaussian(40, 3, 0.7, 2);
  const auto p = bagged_weights(calib, test, 8, 0.05, ClassifierKind::forest, 3);
  EXPECT_EQ(p.calib_weights.size(), 60u);
  EXPECT_EQ(p.test_weights.size(), 40u);
  EXPECT_EQ(p.n_bootstrap, 8u);
  EXPECT_EQ(p.gamma, 0.05);
  EXPECT_LT(p.clip_lo, p.clip_hi);
  for (const auto* w : { &p.calib_weights, &p.test_weights })
    for (double x : *w) {
      EXPECT_GT(x, 0.0);
      EXPECT_GE(x, p.clip_lo);
      EXPECT_LE(x, p.clip_hi);
    }
  // shifted test pool should on average look more test-like
  const double mc = std::accumulate(p.calib_weights.begin(), p.calib_weights.end(), 0.0) / 60.0;
  const double mt = std::accumulate(p.test_weights.begin(), p.test_weights.end(), 0.0) / 40.0;
  EXPECT_GT(mt, mc);
}

TEST(BaggedWeights, DeterministicAndHashed)
{
  const auto calib = gaussian(50, 2, 0.0, 1);
  const auto test = gaussian(30, 2, 0.3, 2);
  const auto a = bagged_weights(calib, test, 5, 0.05, ClassifierKind::forest, 4);
  const auto b = bagged_weights(calib, test, 5, 0.05, ClassifierKind::forest, 4);
  const auto c = bagged_weights(calib, test, 5, 0.05, ClassifierKind::forest, 5);
  EXPECT_EQ(a.calib_weights, b.calib_weights);
  EXPECT_EQ(a.test_weights, b.test_weights);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(BaggedWeights, ConfigErrors)
{
  const auto x = gaussian(10, 2, 0.0, 1);
  EXPECT_THROW(bagged_weights(x, x, 0, 0.05, ClassifierKind::forest, 0), ConfigError);
  EXPECT_THROW(bagged_weights(FeatureMatrix(0, 2), x, 2, 0.05, ClassifierKind::forest, 0), ConfigError);
  EXPECT_THROW(bagged_weights(x, x, 2, 0.5, ClassifierKind::forest, 0), ConfigError);
  EXPECT_THROW(bagged_weights(x, gaussian(10, 3, 0.0, 1), 2, 0.05, ClassifierKind::forest, 0), ConfigError);
}

TEST(EffectiveSampleSize, HandValues)
{
  EXPECT_DOUBLE_EQ(effective_sample_size(std::vector<double>(7, 2.5)), 7.0);
  EXPECT_DOUBLE_EQ(effective_sample_size(std::vector<double>{ 1, 0, 0, 0 }), 1.0);
  EXPECT_NEAR(effective_sample_size(std::vector<double>{ 1, 2, 3 }), 36.0 / 14.0, 1e-15);
  EXPECT_NEAR(effective_sample_size(std::vector<double>{ 1, 2, 3 }), oracle::kish({ 1, 2, 3 }), 1e-15);
}

TEST(EffectiveSampleSize, Bounds)
{
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(1 + rng.uniform_index(30));
    for (auto& x : w)
      x = std::exp(rng.normal(0.0, 3.0));
    const double n_eff = effective_sample_size(w);
    EXPECT_GE(n_eff, 1.0 - 1e-12);
    EXPECT_LE(n_eff, static_cast<double>(w.size()) + 1e-9);
  }
}

TEST(EffectiveSampleSize, RejectsZeroOrNegative)
{
  EXPECT_THROW(effective_sample_size(std::vector<double>{ 0, 0 }), DomainError);
  EXPECT_THROW(effective_sample_size(std::vector<double>{ 1, -1 }), DomainError);
}

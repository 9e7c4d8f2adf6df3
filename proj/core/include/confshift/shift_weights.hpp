#pragma once

#include "confshift/classifier.hpp"
#include "confshift/feature_matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace confshift {

//! Stabilized importance weights for one calibration/test pair.
//! Every weighted p-value method in an experiment consumes the same profile.
struct WeightProfile
{
  std::vector<double> calib_weights;
  std::vector<double> test_weights;
  double clip_lo = 0.0;
  double clip_hi = 0.0;
  double gamma = 0.0;
  std::size_t n_bootstrap = 0;
  std::uint64_t seed = 0;
  ClassifierKind classifier = ClassifierKind::forest;

  //! FNV-1a over the bit patterns of both weight arrays.
  std::uint64_t hash() const;
};

//! Density-ratio weight from a predicted test-membership probability:
//! prior_ratio * p / (1 - p).
double odds_weight(double p, double prior_ratio);

//! ŵ(z) = prior_ratio * p / (1 - p) with p the model's clamped prediction.
double estimate_weights_single(const ClassifierModel& model,
                               std::span<const double> z,
                               double prior_ratio);

//! Row indices of one balanced bootstrap replica: S = min(n_calib, n_test)
//! draws with replacement from each pool.
struct BalancedReplica
{
  std::vector<std::size_t> calib_rows;
  std::vector<std::size_t> test_rows;
};

BalancedReplica balanced_replica(std::size_t n_calib,
                                 std::size_t n_test,
                                 std::uint64_t seed,
                                 std::size_t replica);

//! Seed handed to the classifier of replica `replica`.
std::uint64_t replica_classifier_seed(std::uint64_t seed, std::size_t replica);

//! Per-instance geometric mean exp(mean_b log w_b); rows are replicas.
std::vector<double> geometric_aggregate(const std::vector<std::vector<double>>& replica_weights);

//! Empirical quantile with linear interpolation between order statistics
//! (position q * (n - 1) in the sorted sample).
double empirical_quantile(std::span<const double> values, double q);

struct ClipBounds
{
  double lo = 0.0;
  double hi = 0.0;
};

//! [gamma, 1 - gamma] empirical quantiles; gamma in [0, 0.5).
ClipBounds winsorization_bounds(std::span<const double> values, double gamma);

std::vector<double> winsorize(std::span<const double> values, ClipBounds bounds);

//! Balanced bootstrap bagging of the calibration-vs-test classifier,
//! evaluated on the full pool, geometrically aggregated and winsorized.
WeightProfile bagged_weights(const FeatureMatrix& calib,
                             const FeatureMatrix& test,
                             std::size_t n_bootstrap,
                             double gamma,
                             ClassifierKind kind,
                             std::uint64_t seed);

//! Kish effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> weights);

} // namespace confshift

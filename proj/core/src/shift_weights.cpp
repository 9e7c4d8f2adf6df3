#include "confshift/shift_weights.hpp"

#include "confshift/errors.hpp"
#include "confshift/parallel.hpp"
#include "confshift/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace confshift {

std::uint64_t
WeightProfile::hash() const
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : calib_weights)
    feed(v);
  feed(-1.0); // separator
  for (double v : test_weights)
    feed(v);
  return h;
}

double
odds_weight(double p, double prior_ratio)
{
  return prior_ratio * p / (1.0 - p);
}

double
estimate_weights_single(const ClassifierModel& model, std::span<const double> z, double prior_ratio)
{
  return odds_weight(model.predict(z), prior_ratio);
}

BalancedReplica
balanced_replica(std::size_t n_calib, std::size_t n_test, std::uint64_t seed, std::size_t replica)
{
  if (n_calib == 0 || n_test == 0)
    throw ConfigError("bootstrap pools must be nonempty");
  const std::size_t s = std::min(n_calib, n_test);
  Rng rng(derive_seed(seed, { replica, 0 }));
  BalancedReplica out;
  out.calib_rows.resize(s);
  out.test_rows.resize(s);
  for (auto& r : out.calib_rows)
    r = rng.uniform_index(n_calib);
  for (auto& r : out.test_rows)
    r = rng.uniform_index(n_test);
  return out;
}

std::uint64_t
replica_classifier_seed(std::uint64_t seed, std::size_t replica)
{
  return derive_seed(seed, { replica, 1 });
}

std::vector<double>
geometric_aggregate(const std::vector<std::vector<double>>& replica_weights)
{
  if (replica_weights.empty())
    throw ConfigError("geometric aggregation needs at least one replica");
  const std::size_t n = replica_weights.front().size();
  std::vector<double> log_sum(n, 0.0);
  for (const auto& row : replica_weights) {
    if (row.size() != n)
      throw ConfigError("replica weight vectors differ in length");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(row[i] > 0.0))
        throw DomainError("replica weights must be strictly positive");
      log_sum[i] += std::log(row[i]);
    }
  }
  const double b = static_cast<double>(replica_weights.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::exp(log_sum[i] / b);
  return out;
}

double
empirical_quantile(std::span<const double> values, double q)
{
  if (values.empty())
    throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0))
    throw DomainError("quantile level must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0)
    return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ClipBounds
winsorization_bounds(std::span<const double> values, double gamma)
{
  if (!(gamma >= 0.0 && gamma < 0.5))
    throw ConfigError("winsorization gamma must lie in [0, 0.5)");
  return { empirical_quantile(values, gamma), empirical_quantile(values, 1.0 - gamma) };
}

std::vector<double>
winsorize(std::span<const double> values, ClipBounds bounds)
{
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = std::min(bounds.hi, std::max(bounds.lo, values[i]));
  return out;
}

WeightProfile
bagged_weights(const FeatureMatrix& calib,
               const FeatureMatrix& test,
               std::size_t n_bootstrap,
               double gamma,
               ClassifierKind kind,
               std::uint64_t seed)
{
  if (n_bootstrap == 0)
    throw ConfigError("bagged weights need at least one bootstrap replica");
  if (calib.empty() || test.empty())
    throw ConfigError("bagged weights need nonempty calibration and test pools");
  if (calib.cols() != test.cols())
    throw ConfigError("calibration has " + std::to_string(calib.cols()) + " columns, test has " +
                      std::to_string(test.cols()));
  if (!(gamma >= 0.0 && gamma < 0.5))
    throw ConfigError("winsorization gamma must lie in [0, 0.5)");

  const FeatureMatrix pool = FeatureMatrix::vstack(calib, test);
  std::vector<std::vector<double>> replica_weights(n_bootstrap);

  parallel_for(n_bootstrap, [&](std::size_t b) {
    const auto replica = balanced_replica(calib.rows(), test.rows(), seed, b);
    const auto model = fit_probabilistic_classifier(calib.select_rows(replica.calib_rows),
                                                    test.select_rows(replica.test_rows),
                                                    kind,
                                                    replica_classifier_seed(seed, b));
    auto& w = replica_weights[b];
    w.resize(pool.rows());
    for (std::size_t i = 0; i < pool.rows(); ++i)
      w[i] = estimate_weights_single(model, pool.row(i), model.prior_ratio());
  });

  const auto aggregated = geometric_aggregate(replica_weights);
  const auto bounds = winsorization_bounds(aggregated, gamma);
  const auto clipped = winsorize(aggregated, bounds);

  WeightProfile profile;
  profile.calib_weights.assign(clipped.begin(), clipped.begin() + static_cast<std::ptrdiff_t>(calib.rows()));
  profile.test_weights.assign(clipped.begin() + static_cast<std::ptrdiff_t>(calib.rows()), clipped.end());
  profile.clip_lo = bounds.lo;
  profile.clip_hi = bounds.hi;
  profile.gamma = gamma;
  profile.n_bootstrap = n_bootstrap;
  profile.seed = seed;
  profile.classifier = kind;
  return profile;
}

double
effective_sample_size(std::span<const double> weights)
{
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw DomainError("effective sample size needs finite nonnegative weights");
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0))
    throw DomainError("effective sample size needs at least one positive weight");
  return sum * sum / sum_sq;
}

} // namespace confshift

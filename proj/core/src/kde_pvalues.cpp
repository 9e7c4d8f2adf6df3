#include "confshift/kde_pvalues.hpp"

#include "confshift/errors.hpp"
#include "confshift/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace confshift {

namespace {

constexpr double inv_sqrt_2pi = 0.3989422804014327;
constexpr double inv_sqrt2 = 0.7071067811865476;

// Upper Gaussian tail 1 - Phi(t), evaluated via erfc so that far-tail values
// keep full relative precision instead of cancelling against 1.
double
gaussian_survival(double t)
{
  return 0.5 * std::erfc(t * inv_sqrt2);
}

void
check_scores_weights(std::span<const double> scores, std::span<const double> weights)
{
  if (scores.empty())
    throw DomainError("weighted KDE needs at least one score");
  if (scores.size() != weights.size())
    throw ConfigError("scores and weights differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]))
      throw DomainError("score " + std::to_string(i) + " is not finite");
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw DomainError("weight " + std::to_string(i) + " must be positive and finite");
  }
}

std::size_t
distinct_count(std::span<const double> scores)
{
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

} // namespace

double
WeightedKde::pdf(double s) const
{
  double sum = 0.0;
  for (std::size_t i = 0; i < support_scores.size(); ++i) {
    const double t = (s - support_scores[i]) / bandwidth;
    sum += norm_weights[i] * std::exp(-0.5 * t * t);
  }
  return sum * inv_sqrt_2pi / bandwidth;
}

double
WeightedKde::survival(double s) const
{
  double sum = 0.0;
  for (std::size_t i = 0; i < support_scores.size(); ++i)
    sum += norm_weights[i] * gaussian_survival((s - support_scores[i]) / bandwidth);
  return std::clamp(sum, 0.0, 1.0);
}

double
WeightedKde::cdf(double s) const
{
  double sum = 0.0;
  for (std::size_t i = 0; i < support_scores.size(); ++i)
    sum += norm_weights[i] * gaussian_survival((support_scores[i] - s) / bandwidth);
  return std::clamp(sum, 0.0, 1.0);
}

WeightedKde
fit_weighted_kde(std::span<const double> scores, std::span<const double> weights, double bandwidth)
{
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw DomainError("KDE bandwidth must be positive and finite");
  check_scores_weights(scores, weights);
  WeightedKde kde;
  kde.support_scores.assign(scores.begin(), scores.end());
  double total = 0.0;
  for (double w : weights)
    total += w;
  kde.norm_weights.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    kde.norm_weights[i] = weights[i] / total;
  kde.bandwidth = bandwidth;
  return kde;
}

double
min_bandwidth(std::span<const double> scores)
{
  if (scores.empty())
    return 1e-6;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return std::max(1e-6, 1e-4 * (*hi - *lo));
}

double
silverman_bandwidth(std::span<const double> scores, std::span<const double> weights)
{
  check_scores_weights(scores, weights);
  double total = 0.0, total_sq = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    total += weights[i];
    total_sq += weights[i] * weights[i];
    mean += weights[i] * scores[i];
  }
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    var += weights[i] * (scores[i] - mean) * (scores[i] - mean);
  var /= total;
  const double n_eff = total * total / total_sq;
  // small-sample correction of the weighted variance, as for the unweighted sd
  if (n_eff > 1.0)
    var *= n_eff / (n_eff - 1.0);
  return 1.06 * std::sqrt(var) * std::pow(n_eff, -0.2);
}

std::vector<double>
default_bandwidth_grid(std::span<const double> scores, std::span<const double> weights)
{
  constexpr std::size_t points = 25;
  const double h_min = min_bandwidth(scores);
  double reference = silverman_bandwidth(scores, weights);
  if (!(reference > 0.0))
    reference = h_min;
  std::vector<double> grid(points);
  const double lo = std::log(0.1 * reference);
  const double hi = std::log(10.0 * reference);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    grid[k] = std::max(h_min, std::exp(lo + t * (hi - lo)));
  }
  return grid;
}

double
loo_log_likelihood(std::span<const double> scores, std::span<const double> weights, double bandwidth)
{
  check_scores_weights(scores, weights);
  if (scores.size() < 2)
    throw DomainError("leave-one-out likelihood needs at least two scores");
  if (!(bandwidth > 0.0))
    throw DomainError("KDE bandwidth must be positive");
  const std::size_t n = scores.size();
  double total = 0.0;
  for (double w : weights)
    total += w;

  // kernel sums: acc[i] = sum_{k != i} w_k exp(-d_ik^2 / 2h^2); each pair once
  const double scale = -0.5 / (bandwidth * bandwidth);
  std::vector<double> acc(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double si = scores[i];
    const double wi = weights[i];
    double acc_i = 0.0;
    for (std::size_t k = i + 1; k < n; ++k) {
      const double d = si - scores[k];
      const double e = std::exp(scale * d * d);
      acc_i += weights[k] * e;
      acc[k] += wi * e;
    }
    acc[i] += acc_i;
  }

  const double log_norm = std::log(bandwidth) - std::log(inv_sqrt_2pi);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double log_f;
    if (acc[i] > 0.0) {
      log_f = std::log(acc[i]) - std::log(total - weights[i]) - log_norm;
    } else {
      // every neighbour underflowed: evaluate in log space
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) {
          const double d = scores[i] - scores[k];
          best = std::max(best, std::log(weights[k]) + scale * d * d);
        }
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) {
          const double d = scores[i] - scores[k];
          sum += std::exp(std::log(weights[k]) + scale * d * d - best);
        }
      log_f = best + std::log(sum) - std::log(total - weights[i]) - log_norm;
    }
    ll += (weights[i] / total) * log_f;
  }
  return ll;
}

BandwidthSelection
select_bandwidth_loo(std::span<const double> scores,
                     std::span<const double> weights,
                     std::span<const double> grid)
{
  check_scores_weights(scores, weights);
  if (grid.empty())
    throw DomainError("bandwidth grid is empty");
  const double h_min = min_bandwidth(scores);
  for (double h : grid)
    if (!(h >= h_min) || !std::isfinite(h))
      throw DomainError("bandwidth candidate below the minimum bandwidth " + std::to_string(h_min));

  BandwidthSelection sel;
  sel.grid.assign(grid.begin(), grid.end());
  sel.loo_loglik.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());

  if (distinct_count(scores) < 2) {
    if (scores.size() >= 2)
      for (std::size_t g = 0; g < grid.size(); ++g)
        sel.loo_loglik[g] = loo_log_likelihood(scores, weights, grid[g]);
    sel.chosen = h_min;
    sel.degenerate = true;
    return sel;
  }

  parallel_for(grid.size(), [&](std::size_t g) {
    sel.loo_loglik[g] = loo_log_likelihood(scores, weights, grid[g]);
  });

  std::size_t best = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double v = sel.loo_loglik[g];
    if (!std::isfinite(v))
      continue;
    if (best == grid.size() || v > sel.loo_loglik[best] ||
        (v == sel.loo_loglik[best] && grid[g] < grid[best]))
      best = g;
  }
  if (best == grid.size()) {
    sel.chosen = h_min;
    sel.degenerate = true;
  } else {
    sel.chosen = grid[best];
  }
  return sel;
}

WeightedKde
fit_weighted_kde_auto(std::span<const double> scores, std::span<const double> weights)
{
  check_scores_weights(scores, weights);
  BandwidthSelection sel;
  if (distinct_count(scores) < 2) {
    sel.chosen = min_bandwidth(scores);
    sel.degenerate = true;
  } else {
    const auto grid = default_bandwidth_grid(scores, weights);
    sel = select_bandwidth_loo(scores, weights, grid);
  }
  auto kde = fit_weighted_kde(scores, weights, sel.chosen);
  kde.degenerate = sel.degenerate;
  return kde;
}

double
kde_pvalue(const WeightedKde& kde, double test_score)
{
  return kde.survival(test_score);
}

PValueVector
kde_pvalue_batch(const WeightedKde& kde, std::span<const double> test_scores)
{
  PValueVector out;
  out.method = PValueMethod::kde;
  out.values.resize(test_scores.size());
  for (std::size_t j = 0; j < test_scores.size(); ++j)
    out.values[j] = kde_pvalue(kde, test_scores[j]);
  return out;
}

} // namespace confshift

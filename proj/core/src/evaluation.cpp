#include "confshift/evaluation.hpp"

#include "confshift/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace confshift {

namespace {

void
check_indices(std::span<const std::size_t> rejected, std::size_t m)
{
  for (std::size_t j : rejected)
    if (j >= m)
      throw DomainError("rejected index " + std::to_string(j) + " is out of range");
}

void
check_lengths(std::span<const double> scores, std::span<const Label> labels)
{
  if (scores.size() != labels.size())
    throw ConfigError("scores and labels differ in length");
}

// 1-based midranks of the values.
std::vector<double>
midranks(std::span<const double> values)
{
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t k = i;
    while (k + 1 < n && values[order[k + 1]] == values[order[i]])
      ++k;
    const double mid = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t t = i; t <= k; ++t)
      ranks[order[t]] = mid;
    i = k + 1;
  }
  return ranks;
}

std::size_t
count_anomalies(std::span<const Label> labels)
{
  return static_cast<std::size_t>(
    std::count(labels.begin(), labels.end(), Label::anomaly));
}

} // namespace

double
fdp(std::span<const std::size_t> rejected, std::span<const Label> labels)
{
  check_indices(rejected, labels.size());
  std::size_t false_alarms = 0;
  for (std::size_t j : rejected)
    if (labels[j] == Label::inlier)
      ++false_alarms;
  return static_cast<double>(false_alarms) /
         static_cast<double>(std::max<std::size_t>(1, rejected.size()));
}

std::optional<double>
power(std::span<const std::size_t> rejected, std::span<const Label> labels)
{
  check_indices(rejected, labels.size());
  const std::size_t n_anomalies = count_anomalies(labels);
  if (n_anomalies == 0)
    return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t j : rejected)
    if (labels[j] == Label::anomaly)
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(n_anomalies);
}

TrialMetrics
trial_metrics(std::span<const std::size_t> rejected, std::span<const Label> labels)
{
  TrialMetrics t;
  t.fdp = fdp(rejected, labels);
  t.power = power(rejected, labels);
  t.n_rejected = rejected.size();
  t.n_anomalies = count_anomalies(labels);
  return t;
}

MeanSd
mean_sd(std::span<const double> values)
{
  MeanSd r;
  r.n = values.size();
  if (values.empty())
    return r;
  // extended-precision sums keep the mean of equal values exact
  long double sum = 0.0L;
  for (double v : values)
    sum += v;
  const long double mean = sum / static_cast<long double>(r.n);
  r.mean = static_cast<double>(mean);
  if (r.n > 1) {
    long double ss = 0.0L;
    for (double v : values)
      ss += (v - mean) * (v - mean);
    r.sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(r.n - 1)));
  }
  return r;
}

double
coefficient_of_variation(std::span<const double> values)
{
  const auto s = mean_sd(values);
  if (s.sd == 0.0)
    return 0.0;
  if (s.mean == 0.0)
    return std::numeric_limits<double>::infinity();
  return s.sd / std::abs(s.mean);
}

double
t_quantile_995(std::size_t df)
{
  if (df == 0)
    throw DomainError("t quantile needs at least one degree of freedom");
  if (df == 19)
    return 2.861;
  const boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 0.995);
}

ValiditySummary
validity(std::span<const double> fdps, double alpha)
{
  if (fdps.size() < 2)
    throw DomainError("validity rule needs at least two trials");
  return validity_lenient(fdps, alpha);
}

ValiditySummary
validity_lenient(std::span<const double> fdps, double alpha)
{
  if (fdps.empty())
    throw DomainError("validity rule needs at least one trial");
  const auto s = mean_sd(fdps);
  ValiditySummary v;
  v.mean_fdp = s.mean;
  v.sd_fdp = s.sd;
  v.n_trials = s.n;
  v.alpha = alpha;
  v.bound = alpha;
  if (s.n >= 2)
    v.bound += t_quantile_995(s.n - 1) * s.sd / std::sqrt(static_cast<double>(s.n));
  v.valid = v.mean_fdp <= v.bound;
  v.valid_raw = v.mean_fdp <= alpha;
  return v;
}

double
roc_auc(std::span<const double> scores, std::span<const Label> labels)
{
  check_lengths(scores, labels);
  const std::size_t n1 = count_anomalies(labels);
  const std::size_t n0 = labels.size() - n1;
  if (n1 == 0 || n0 == 0)
    throw DomainError("ROC-AUC needs both classes");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == Label::anomaly)
      rank_sum += ranks[i];
  const double d1 = static_cast<double>(n1);
  return (rank_sum - d1 * (d1 + 1.0) / 2.0) / (d1 * static_cast<double>(n0));
}

double
pr_auc(std::span<const double> scores, std::span<const Label> labels)
{
  check_lengths(scores, labels);
  const std::size_t n1 = count_anomalies(labels);
  if (n1 == 0 || n1 == labels.size())
    throw DomainError("PR-AUC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t k = i;
    while (k < order.size() && scores[order[k]] == scores[order[i]]) {
      if (labels[order[k]] == Label::anomaly)
        ++tp;
      ++k;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n1);
    const double precision = static_cast<double>(tp) / static_cast<double>(k);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = k;
  }
  return ap;
}

double
brier_score(std::span<const double> scores, std::span<const Label> labels)
{
  check_lengths(scores, labels);
  if (scores.empty())
    throw DomainError("Brier score needs at least one score");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double q = range > 0.0 ? (scores[i] - *lo) / range : 0.5;
    const double y = labels[i] == Label::anomaly ? 1.0 : 0.0;
    sum += (q - y) * (q - y);
  }
  return sum / static_cast<double>(scores.size());
}

ClassificationMetrics
classification_metrics(std::span<const double> scores, std::span<const Label> labels)
{
  ClassificationMetrics m;
  m.pr_auc = pr_auc(scores, labels);
  m.roc_auc = roc_auc(scores, labels);
  m.brier = brier_score(scores, labels);
  return m;
}

std::size_t
lexicographic_select(std::span<const ModelCandidate> candidates)
{
  if (candidates.empty())
    throw ConfigError("model selection needs at least one candidate");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& a = candidates[i].metrics;
    const auto& b = candidates[best].metrics;
    bool better = false;
    if (a.pr_auc != b.pr_auc)
      better = a.pr_auc > b.pr_auc;
    else if (a.roc_auc != b.roc_auc)
      better = a.roc_auc > b.roc_auc;
    else
      better = a.brier < b.brier;
    if (better)
      best = i;
  }
  return best;
}

std::vector<CurvePoint>
superuniformity_curve(std::span<const double> pvalues, std::span<const double> grid)
{
  std::vector<double> sorted(pvalues.begin(), pvalues.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CurvePoint> curve;
  curve.reserve(grid.size());
  for (double u : grid) {
    if (!(u > 0.0 && u < 1.0))
      throw DomainError("curve grid values must lie in (0, 1)");
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), u) - sorted.begin();
    const double cdf =
      sorted.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(sorted.size());
    curve.push_back({ u, cdf });
  }
  return curve;
}

std::vector<double>
percent_grid()
{
  std::vector<double> grid(99);
  for (std::size_t k = 0; k < grid.size(); ++k)
    grid[k] = static_cast<double>(k + 1) / 100.0;
  return grid;
}

double
ks_statistic_uniform(std::span<const double> sample)
{
  if (sample.empty())
    throw DomainError("KS statistic needs a nonempty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max(d, static_cast<double>(i + 1) / n - x);
    d = std::max(d, x - static_cast<double>(i) / n);
  }
  return d;
}

double
ks_statistic_two_sample(std::span<const double> a, std::span<const double> b)
{
  if (a.empty() || b.empty())
    throw DomainError("KS statistic needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto nx = static_cast<double>(x.size());
  const auto ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v)
      ++i;
    while (j < y.size() && y[j] == v)
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double
kolmogorov_survival(double lambda)
{
  // the series converges slowly near 0, where the tail is 1 to double precision
  if (lambda < 0.2)
    return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17)
      break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double
ks_pvalue(double d, std::size_t n)
{
  if (n == 0)
    throw DomainError("KS p-value needs a positive sample size");
  const double rn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

double
ks_pvalue_two_sample(double d, std::size_t n_a, std::size_t n_b)
{
  if (n_a == 0 || n_b == 0)
    throw DomainError("KS p-value needs positive sample sizes");
  const double ne = static_cast<double>(n_a) * static_cast<double>(n_b) /
                    static_cast<double>(n_a + n_b);
  const double rn = std::sqrt(ne);
  return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d);
}

} // namespace confshift

#include "confshift/multiple_testing.hpp"

#include "confshift/errors.hpp"
#include "confshift/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace confshift {

namespace {

void
check_alpha(double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
}

void
check_pvalues(std::span<const double> p)
{
  for (std::size_t j = 0; j < p.size(); ++j)
    if (!(p[j] >= 0.0 && p[j] <= 1.0))
      throw DomainError("p-value " + std::to_string(j) + " is outside [0, 1]");
}

double
cutoff(double alpha, std::size_t r, std::size_t m)
{
  return alpha * static_cast<double>(r) / static_cast<double>(m);
}

// Indices ordered by (p, index).
std::vector<std::size_t>
rank_order(std::span<const double> p, std::span<const std::size_t> members)
{
  std::vector<std::size_t> order(members.begin(), members.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p[a] < p[b] || (p[a] == p[b] && a < b);
  });
  return order;
}

} // namespace

std::string_view
to_string(Procedure p)
{
  switch (p) {
    case Procedure::bh:
      return "bh";
    case Procedure::wcs_det:
      return "wcs_det";
    case Procedure::wcs_hom:
      return "wcs_hom";
    case Procedure::wcs_het:
      return "wcs_het";
  }
  return "bh";
}

std::string_view
to_string(Pruning p)
{
  switch (p) {
    case Pruning::deterministic:
      return "deterministic";
    case Pruning::homogeneous:
      return "homogeneous";
    case Pruning::heterogeneous:
      return "heterogeneous";
  }
  return "deterministic";
}

Procedure
parse_procedure(std::string_view s)
{
  if (s == "bh")
    return Procedure::bh;
  if (s == "wcs_det")
    return Procedure::wcs_det;
  if (s == "wcs_hom")
    return Procedure::wcs_hom;
  if (s == "wcs_het")
    return Procedure::wcs_het;
  throw ConfigError("unknown procedure '" + std::string(s) + "'");
}

Pruning
parse_pruning(std::string_view s)
{
  if (s == "deterministic" || s == "det")
    return Pruning::deterministic;
  if (s == "homogeneous" || s == "hom")
    return Pruning::homogeneous;
  if (s == "heterogeneous" || s == "het")
    return Pruning::heterogeneous;
  throw ConfigError("unknown pruning strategy '" + std::string(s) + "'");
}

Procedure
wcs_procedure(Pruning p)
{
  switch (p) {
    case Pruning::deterministic:
      return Procedure::wcs_det;
    case Pruning::homogeneous:
      return Procedure::wcs_hom;
    case Pruning::heterogeneous:
      return Procedure::wcs_het;
  }
  return Procedure::wcs_det;
}

DecisionReport
benjamini_hochberg(std::span<const double> p, double alpha)
{
  check_alpha(alpha);
  check_pvalues(p);
  const std::size_t m = p.size();
  DecisionReport report;
  report.procedure = Procedure::bh;
  report.alpha = alpha;
  report.m = m;
  if (m == 0)
    return report;

  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto order = rank_order(p, all);
  std::size_t k = 0;
  for (std::size_t r = m; r >= 1; --r)
    if (p[order[r - 1]] <= cutoff(alpha, r, m)) {
      k = r;
      break;
    }
  report.rejected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(report.rejected.begin(), report.rejected.end());
  report.threshold = cutoff(alpha, k, m);
  return report;
}

WcsSelection
wcs_select(std::span<const double> p, double alpha)
{
  check_alpha(alpha);
  check_pvalues(p);
  const std::size_t m = p.size();
  WcsSelection sel;
  for (std::size_t r = m; r >= 1; --r) {
    const double t = cutoff(alpha, r, m);
    const auto count = static_cast<std::size_t>(
      std::count_if(p.begin(), p.end(), [t](double v) { return v <= t; }));
    if (count >= r) {
      sel.r_star = r;
      break;
    }
  }
  if (sel.r_star > 0) {
    const double t = cutoff(alpha, sel.r_star, m);
    for (std::size_t j = 0; j < m; ++j)
      if (p[j] <= t)
        sel.candidates.push_back(j);
  }
  return sel;
}

DecisionReport
wcs_prune(const WcsSelection& selection,
          std::span<const double> p,
          double alpha,
          Pruning strategy,
          std::optional<std::uint64_t> seed)
{
  check_alpha(alpha);
  if (strategy != Pruning::deterministic && !seed)
    throw ConfigError("randomized pruning requires a seed");
  for (std::size_t j : selection.candidates)
    if (j >= p.size())
      throw DomainError("candidate index " + std::to_string(j) + " is out of range");

  DecisionReport report;
  report.procedure = wcs_procedure(strategy);
  report.alpha = alpha;
  report.m = p.size();
  report.wcs_approx = true;
  if (strategy != Pruning::deterministic)
    report.prune_seed = seed;

  const std::size_t r_star = selection.r_star;
  if (selection.candidates.size() <= r_star) {
    report.rejected = selection.candidates;
  } else {
    const auto order = rank_order(p, selection.candidates);
    Rng rng(seed.value_or(0));
    const double shared_xi = strategy == Pruning::homogeneous ? rng.uniform() : 0.0;
    const auto limit = static_cast<double>(r_star);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto rank = static_cast<double>(pos + 1);
      double xi = 0.0;
      if (strategy == Pruning::homogeneous)
        xi = shared_xi;
      else if (strategy == Pruning::heterogeneous)
        xi = rng.uniform();
      if (strategy == Pruning::deterministic ? rank <= limit : rank - xi < limit)
        report.rejected.push_back(order[pos]);
    }
    std::sort(report.rejected.begin(), report.rejected.end());
  }
  report.threshold = report.m == 0 ? 0.0 : cutoff(alpha, report.rejected.size(), report.m);
  return report;
}

DecisionReport
weighted_conformal_selection(std::span<const double> p,
                             double alpha,
                             Pruning strategy,
                             std::optional<std::uint64_t> seed)
{
  return wcs_prune(wcs_select(p, alpha), p, alpha, strategy, seed);
}

} // namespace confshift

#include "confshift/conformal_pvalues.hpp"
#include "confshift/kde_pvalues.hpp"
#include "confshift/multiple_testing.hpp"
#include "confshift/random.hpp"
#include "confshift/scoring.hpp"
#include "confshift/shift_weights.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace confshift;

namespace {

std::vector<double>
normals(std::size_t n, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v)
    x = rng.normal();
  return v;
}

std::vector<double>
lognormals(std::size_t n, std::uint64_t seed)
{
  auto v = normals(n, seed);
  for (auto& x : v)
    x = std::exp(x);
  return v;
}

FeatureMatrix
gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed)
{
  return FeatureMatrix(n, d, normals(n * d, seed));
}

void
BM_DiscretePValues(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto calib = normals(n, 1), test = normals(100, 2);
  const auto cw = lognormals(n, 3), tw = lognormals(100, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(discrete_pvalues(calib, cw, test, tw));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_DiscretePValues)->Arg(100)->Arg(1000)->Arg(10000);

void
BM_KdeAutoFit(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto calib = normals(n, 5);
  const auto w = lognormals(n, 6);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_weighted_kde_auto(calib, w));
}
BENCHMARK(BM_KdeAutoFit)->Arg(100)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void
BM_KdePValue(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto kde = fit_weighted_kde(normals(n, 7), lognormals(n, 8), 0.3);
  double s = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kde_pvalue(kde, s));
    s = s > 3.0 ? -3.0 : s + 0.01;
  }
}
BENCHMARK(BM_KdePValue)->Arg(100)->Arg(1000)->Arg(10000);

void
BM_BenjaminiHochberg(benchmark::State& state)
{
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  std::vector<double> p(m);
  for (auto& v : p)
    v = rng.uniform() * rng.uniform();
  for (auto _ : state)
    benchmark::DoNotOptimize(benjamini_hochberg(p, 0.1));
}
BENCHMARK(BM_BenjaminiHochberg)->Arg(100)->Arg(10000);

void
BM_BaggedWeights(benchmark::State& state)
{
  const auto calib = gaussian_matrix(200, 4, 10);
  const auto test = gaussian_matrix(100, 4, 11);
  const auto kind = state.range(0) == 0 ? ClassifierKind::logistic : ClassifierKind::forest;
  for (auto _ : state)
    benchmark::DoNotOptimize(bagged_weights(calib, test, 10, 0.05, kind, 12));
}
BENCHMARK(BM_BaggedWeights)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void
BM_KnnScore(benchmark::State& state)
{
  const auto train = gaussian_matrix(static_cast<std::size_t>(state.range(0)), 4, 13);
  const auto query = gaussian_matrix(100, 4, 14);
  const auto scorer = fit_knn_scorer(train, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(scorer.score_all(query));
}
BENCHMARK(BM_KnnScore)->Arg(200)->Arg(2000);

} // namespace
BENCHMARK_MAIN();

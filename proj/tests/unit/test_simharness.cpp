#include "confshift/conformal_pvalues.hpp"
#include "confshift/errors.hpp"
#include "confshift/evaluation.hpp"
#include "confshift/multiple_testing.hpp"
#include "confshift/random.hpp"
#include "confshift/simharness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace confshift;
using namespace confshift::sim;

namespace {

ExperimentSpec
small_spec()
{
  ExperimentSpec s;
  s.name = "unit";
  s.n_train = 120;
  s.n_cal = 60;
  s.n_test = 60;
  s.dim = 3;
  s.anomaly_rate = 0.1;
  s.n_seeds = 3;
  s.weights.n_bootstrap = 3;
  s.pruning = { Pruning::deterministic, Pruning::heterogeneous };
  s.shift.kind = ShiftKind::mean_shift;
  s.shift.delta = { 0.5, 0.0, 0.0 };
  return s;
}

//! Gaussian mixture density written from the generator description.
double
mixture_density(const ExperimentSpec& s, std::span<const double> x, const std::vector<double>& shift, double sd)
{
  double total = 0.0;
  for (double sign : { -1.0, 1.0 }) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < s.dim; ++d) {
      const double mu = (d == 1 ? sign * s.separation / 2.0 : 0.0) + shift[d];
      d2 += (x[d] - mu) * (x[d] - mu) / (sd * sd);
    }
    total += 0.5 * std::exp(-0.5 * d2) / std::pow(std::sqrt(2.0 * std::numbers::pi) * sd, static_cast<double>(s.dim));
  }
  return total;
}

std::vector<double>
column(const FeatureMatrix& x, std::size_t c, const std::vector<Label>* keep = nullptr)
{
  std::vector<double> out;
  for (std::size_t i = 0; i < x.rows(); ++i)
    if (!keep || (*keep)[i] == Label::inlier)
      out.push_back(x(i, c));
  return out;
}

bool
same_rows(const std::vector<TrialResult>& a, const std::vector<TrialResult>& b)
{
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = a[i], &y = b[i];
    if (x.seed != y.seed || x.method != y.method || x.pruning != y.pruning || x.scorer != y.scorer ||
        x.fdp != y.fdp || x.power != y.power || x.n_rejected != y.n_rejected || x.min_p != y.min_p ||
        x.weights_hash != y.weights_hash || x.n_eff != y.n_eff)
      return false;
  }
  return true;
}

//! Adds `extra` to the score of one specific feature row.
class InflatingScorer final : public Scorer
{
public:
  InflatingScorer(const Scorer& base, std::span<const double> target, double extra)
    : base_(base)
    , target_(target.begin(), target.end())
    , extra_(extra)
  {}
  double score(std::span<const double> x) const override
  {
    const double s = base_.score(x);
    return std::equal(x.begin(), x.end(), target_.begin(), target_.end()) ? s + extra_ : s;
  }
  std::string_view name() const override { return base_.name(); }

private:
  const Scorer& base_;
  std::vector<double> target_;
  double extra_;
};

} // namespace

TEST(Spec, Defaults)
{
  const ExperimentSpec s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.methods, all_methods());
  EXPECT_EQ(all_methods().size(), 6u);
}

TEST(Spec, JsonRoundTrip)
{
  const auto s = small_spec();
  const auto back = parse_spec(spec_to_json(s));
  EXPECT_EQ(spec_to_json(back), spec_to_json(s));
}

TEST(Spec, UnknownKeysNamed)
{
  auto j = spec_to_json(small_spec());
  j["n_calib"] = 10;
  try {
    parse_spec(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("n_calib"), std::string::npos);
  }
  auto k = spec_to_json(small_spec());
  k["weights"]["bootstraps"] = 3;
  try {
    parse_spec(k);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("weights.bootstraps"), std::string::npos);
  }
}

TEST(Spec, Validation)
{
  auto s = small_spec();
  s.anomaly_rate = 0.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.n_seeds = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.shift.delta = { 1.0 };
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Methods, NamesAndFlags)
{
  for (auto m : all_methods())
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_TRUE(is_weighted(Method::wkde));
  EXPECT_FALSE(is_weighted(Method::edf_rand));
  EXPECT_TRUE(is_randomized(Method::wedf_rand));
  EXPECT_FALSE(is_randomized(Method::kde));
  EXPECT_THROW(parse_method("edf2"), ConfigError);
}

TEST(Generator, SplitSizesAndStandardization)
{
  const auto s = small_spec();
  const auto p = generate_problem(s, 5);
  const std::size_t n_val = static_cast<std::size_t>(std::lround(s.validation_fraction * s.n_train));
  EXPECT_EQ(p.val.rows(), n_val);
  EXPECT_EQ(p.train.rows(), s.n_train - n_val);
  EXPECT_EQ(p.calib.rows(), s.n_cal);
  EXPECT_EQ(p.test.rows(), s.n_test);
  EXPECT_EQ(p.test_labels.size(), s.n_test);
  EXPECT_NE(std::find(p.val_labels.begin(), p.val_labels.end(), Label::anomaly), p.val_labels.end());
  EXPECT_NE(std::find(p.val_labels.begin(), p.val_labels.end(), Label::inlier), p.val_labels.end());
  for (std::size_t c = 0; c < s.dim; ++c) {
    const auto t = column(p.train, c);
    const auto ms = mean_sd(t);
    EXPECT_NEAR(ms.mean, 0.0, 1e-12);
  }
}

TEST(Generator, NoShiftMarginalsMatch)
{
  auto s = small_spec();
  s.shift = {};
  s.n_cal = 1000;
  s.n_test = 1000;
  s.anomaly_rate = 0.05;
  std::size_t passed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = generate_problem(s, seed);
    const auto a = column(p.calib_raw, 0);
    const auto b = column(p.test_raw, 0, &p.test_labels);
    if (ks_pvalue_two_sample(ks_statistic_two_sample(a, b), a.size(), b.size()) > 0.01)
      ++passed;
  }
  EXPECT_GE(passed, 95u);
}

TEST(Generator, AnomalyCountMoments)
{
  auto s = small_spec();
  s.n_test = 400;
  s.anomaly_rate = 0.05;
  std::vector<double> counts;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto p = generate_problem(s, seed);
    counts.push_back(static_cast<double>(std::count(p.test_labels.begin(), p.test_labels.end(), Label::anomaly)));
  }
  const auto ms = mean_sd(counts);
  const double sd = std::sqrt(400 * 0.05 * 0.95);
  EXPECT_NEAR(sd, 4.36, 0.01);
  EXPECT_NEAR(ms.mean, 20.0, 4.0 * sd / std::sqrt(400.0));
  EXPECT_NEAR(ms.sd / sd, 1.0, 0.15);
}

TEST(Generator, ZeroLocalizationEqualsNoShift)
{
  auto a = small_spec();
  a.shift = {};
  auto b = a;
  b.shift.kind = ShiftKind::localization;
  b.shift.strength = 0.0;
  const auto pa = generate_problem(a, 9);
  const auto pb = generate_problem(b, 9);
  EXPECT_EQ(pa.test_raw.values(), pb.test_raw.values());
  EXPECT_EQ(pa.test_labels, pb.test_labels);
  const std::vector<double> x = { 0.3, -1.0, 2.0 };
  EXPECT_NEAR(true_weight(b, x), 1.0, 1e-14);
}

TEST(Generator, DeterministicPerSeed)
{
  const auto s = small_spec();
  const auto a = generate_problem(s, 11);
  const auto b = generate_problem(s, 11);
  const auto c = generate_problem(s, 12);
  EXPECT_EQ(a.test.values(), b.test.values());
  EXPECT_EQ(a.calib.values(), b.calib.values());
  EXPECT_NE(a.test.values(), c.test.values());
}

TEST(TrueWeight, MatchesClosedFormMixtureRatio)
{
  auto shifted = small_spec();
  auto local = small_spec();
  local.shift = {};
  local.shift.kind = ShiftKind::localization;
  local.shift.strength = 1.5;
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> x = { rng.normal(0.0, 2.0), rng.normal(), rng.normal() };
    const double p = mixture_density(shifted, x, { 0, 0, 0 }, 1.0);
    EXPECT_NEAR(inlier_density(shifted, x) / p, 1.0, 1e-12);
    EXPECT_NEAR(true_weight(shifted, x) / (mixture_density(shifted, x, shifted.shift.delta, 1.0) / p), 1.0, 1e-10);
    EXPECT_NEAR(true_weight(local, x) / (mixture_density(local, x, { 0, 0, 0 }, 1.0 / 2.5) / p), 1.0, 1e-10);
  }
}

TEST(TrueWeight, UnitMeanUnderCalibrationLaw)
{
  const auto s = small_spec();
  double total = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto q = generate_problem(s, seed);
    for (std::size_t i = 0; i < q.calib_raw.rows(); ++i, ++n)
      total += true_weight(s, q.calib_raw.row(i));
  }
  EXPECT_NEAR(total / static_cast<double>(n), 1.0, 0.05);
}

TEST(PhaseOne, DeterministicSelection)
{
  const auto s = small_spec();
  const auto a = run_phase1(s, 0);
  const auto b = run_phase1(s, 0);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.candidates.size(), 3u);
  EXPECT_NE(std::find(s.scorers.begin(), s.scorers.end(), a.selected), s.scorers.end());
}

TEST(PhaseOne, DominantScorerAlwaysChosen)
{
  // with a single listed scorer the choice is forced
  auto s = small_spec();
  s.scorers = { "mahalanobis" };
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(run_phase1(s, i).selected, "mahalanobis");
}

TEST(PhaseTwo, UnweightedEdfMatchesStandaloneBh)
{
  auto s = small_spec();
  s.methods = { Method::edf };
  const auto p = generate_problem(s, trial_seed(s, 0));
  const auto scorer = make_scorer(s, "knn", p.train);
  TrialArtifacts art;
  const auto rows = run_phase2(s, p, *scorer, 0, &art);
  ASSERT_EQ(rows.size(), 1u);

  const auto calib = scorer->score_all(p.calib);
  const auto test = scorer->score_all(p.test);
  EXPECT_EQ(art.calib_scores, calib);
  const auto pv = discrete_pvalues(calib, unit_weights(calib.size()), test, unit_weights(test.size()));
  const auto r = benjamini_hochberg(pv.values, s.alpha);
  const auto m = trial_metrics(r.rejected, p.test_labels);
  EXPECT_EQ(rows[0].fdp, m.fdp);
  EXPECT_EQ(rows[0].power, m.power);
  EXPECT_EQ(rows[0].n_rejected, m.n_rejected);
  EXPECT_FALSE(rows[0].pruning.has_value());
  EXPECT_EQ(rows[0].weights_hash, 0u);
  EXPECT_EQ(rows[0].min_p, *std::min_element(pv.values.begin(), pv.values.end()));
}

TEST(PhaseTwo, WeightedMethodsShareOneProfile)
{
  const auto s = small_spec();
  const auto rows = run_trial(s, 1);
  std::uint64_t hash = 0;
  std::size_t weighted = 0;
  for (const auto& r : rows) {
    if (!is_weighted(r.method))
      continue;
    ++weighted;
    if (hash == 0)
      hash = r.weights_hash;
    EXPECT_EQ(r.weights_hash, hash) << to_string(r.method);
    EXPECT_TRUE(r.pruning.has_value());
  }
  EXPECT_NE(hash, 0u);
  // three weighted methods times two pruning strategies, plus three BH rows
  EXPECT_EQ(weighted, 6u);
  EXPECT_EQ(rows.size(), 9u);
}

TEST(PhaseTwo, KdeHasNoFloorUnderInflation)
{
  auto s = small_spec();
  s.methods = { Method::kde, Method::edf };
  const auto p = generate_problem(s, trial_seed(s, 2));
  const auto base = make_scorer(s, "knn", p.train);
  const auto test = base->score_all(p.test);
  const std::size_t top = static_cast<std::size_t>(std::max_element(test.begin(), test.end()) - test.begin());

  const auto plain = run_phase2(s, p, *base, 2);
  const InflatingScorer inflated(*base, p.test.row(top), 5.0);
  const auto bumped = run_phase2(s, p, inflated, 2);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    if (plain[i].method == Method::kde) {
      EXPECT_LT(bumped[i].min_p, plain[i].min_p);
      EXPECT_LT(bumped[i].min_p, 1.0 / static_cast<double>(s.n_cal + 1));
      EXPECT_EQ(plain[i].floor_max, 0.0);
    } else {
      // the discrete p-value stops at its floor 1 / (n + 1)
      EXPECT_DOUBLE_EQ(bumped[i].min_p, 1.0 / static_cast<double>(s.n_cal + 1));
    }
  }
}

TEST(PhaseTwo, OracleWeightsAreTrueRatios)
{
  auto s = small_spec();
  s.weights.source = WeightSource::oracle;
  s.methods = { Method::wedf };
  const auto p = generate_problem(s, trial_seed(s, 0));
  const auto scorer = make_scorer(s, "knn", p.train);
  TrialArtifacts art;
  run_phase2(s, p, *scorer, 0, &art);
  for (std::size_t i = 0; i < p.calib_raw.rows(); ++i)
    EXPECT_NEAR(art.calib_weights[i] / true_weight(s, p.calib_raw.row(i)), 1.0, 1e-12);
}

TEST(Experiment, Reproducible)
{
  const auto s = small_spec();
  const auto a = run_experiment(s);
  const auto b = run_experiment(s);
  EXPECT_TRUE(same_rows(a.rows, b.rows));
  EXPECT_EQ(results_to_csv(a.rows), results_to_csv(b.rows));
  EXPECT_EQ(summary_to_csv(a.summary), summary_to_csv(b.summary));
}

TEST(Experiment, MethodOrderDoesNotMatter)
{
  auto s = small_spec();
  const auto a = run_experiment(s);
  std::reverse(s.methods.begin(), s.methods.end());
  const auto b = run_experiment(s);
  EXPECT_EQ(summary_to_csv(a.summary), summary_to_csv(b.summary));
}

TEST(Experiment, DoublingSeedsExtendsRows)
{
  auto s = small_spec();
  s.n_seeds = 2;
  const auto a = run_experiment(s);
  s.n_seeds = 4;
  const auto b = run_experiment(s);
  std::vector<TrialResult> head;
  for (const auto& r : b.rows)
    if (r.seed_index < 2)
      head.push_back(r);
  EXPECT_TRUE(same_rows(a.rows, head));
}

TEST(Experiment, SingleSeedHasZeroSd)
{
  auto s = small_spec();
  s.n_seeds = 1;
  const auto r = run_experiment(s);
  ASSERT_FALSE(r.summary.empty());
  for (const auto& row : r.summary) {
    EXPECT_EQ(row.fdr_sd, 0.0);
    EXPECT_EQ(row.power_sd, 0.0);
    EXPECT_EQ(row.n_trials, 1u);
  }
}

TEST(Experiment, ResultsCsvRoundTrip)
{
  const auto r = run_experiment(small_spec());
  const auto text = results_to_csv(r.rows);
  const auto back = parse_results_csv(text);
  EXPECT_EQ(results_to_csv(back), text);
  EXPECT_EQ(summary_to_csv(summarize(back)), summary_to_csv(r.summary));
}

TEST(Experiment, SummaryHeader)
{
  const auto csv = summary_to_csv({});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "dataset,method,pruning,fdr_mean,fdr_sd,power_mean,power_sd,n_train,n_test,valid,valid_raw,fdr_bound,"
            "n_trials,n_power,mean_n_eff,mean_rejected");
}

TEST(Redraw, DeterministicMethodsDoNotVary)
{
  const auto s = small_spec();
  const auto kde = redraw_rejection_counts(s, 0, Method::wkde, Pruning::deterministic, 10);
  EXPECT_EQ(coefficient_of_variation(std::vector<double>(kde.begin(), kde.end())), 0.0);
  const auto a = redraw_rejection_counts(s, 0, Method::wedf_rand, Pruning::deterministic, 10);
  const auto b = redraw_rejection_counts(s, 0, Method::wedf_rand, Pruning::deterministic, 10);
  EXPECT_EQ(a, b);
}

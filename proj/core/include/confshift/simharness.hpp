#pragma once

#include "confshift/classifier.hpp"
#include "confshift/evaluation.hpp"
#include "confshift/feature_matrix.hpp"
#include "confshift/multiple_testing.hpp"
#include "confshift/scoring.hpp"
#include "confshift/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confshift::sim {

// Synthetic data model. Inliers come from an equal-weight two-component
// Gaussian mixture in `dim` dimensions with identity covariance and means
// +-(separation / 2) on coordinate 1 (0-based). Anomalies are drawn around a
// random mixture mean with standard deviation `anomaly_scale`, displaced by
// `anomaly_offset` along the last axis. Covariate shift acts on test inliers only:
//   mean_shift(delta)        translates every component by delta;
//   localization(strength)   contracts every component towards its mean,
//                            standard deviation 1 / (1 + strength).
// Either way the test-inlier density is again a Gaussian mixture, so the
// true likelihood ratio q(x) / p(x) is available in closed form.

enum class Method
{
  edf,
  edf_rand,
  kde,
  wedf,
  wedf_rand,
  wkde
};

std::string_view to_string(Method m);
Method parse_method(std::string_view s);
bool is_weighted(Method m);
bool is_randomized(Method m);
//! Methods in their canonical order, which also fixes output row order.
const std::vector<Method>& all_methods();

enum class ShiftKind
{
  none,
  mean_shift,
  localization
};

struct ShiftSpec
{
  ShiftKind kind = ShiftKind::none;
  //! mean_shift: translation vector, one entry per dimension.
  std::vector<double> delta;
  //! localization: contraction strength, >= 0.
  double strength = 0.0;

  //! Translation applied to test inliers in `dim` dimensions.
  std::vector<double> translation(std::size_t dim) const;
  //! Per-component standard deviation of test inliers.
  double spread() const;
};

enum class WeightSource
{
  //! Bagged classifier estimate, shared by all weighted methods.
  estimated,
  //! Closed-form likelihood ratio of the generator, not winsorized.
  oracle
};

struct WeightSpec
{
  WeightSource source = WeightSource::estimated;
  ClassifierKind classifier = ClassifierKind::forest;
  std::size_t n_bootstrap = 10;
  double gamma = 0.05;
};

struct ExperimentSpec
{
  std::string name = "synthetic";
  std::size_t n_train = 200;
  std::size_t n_cal = 100;
  std::size_t n_test = 100;
  std::size_t dim = 4;
  double anomaly_rate = 0.05;
  double separation = 2.0;
  double anomaly_scale = 3.0;
  double anomaly_offset = 0.0;
  ShiftSpec shift;
  std::vector<Method> methods = all_methods();
  std::vector<Pruning> pruning = { Pruning::deterministic };
  double alpha = 0.1;
  std::size_t n_seeds = 20;
  std::uint64_t master_seed = 1;
  //! Share of the training rows held out for phase-1 model selection.
  double validation_fraction = 0.3;
  std::vector<std::string> scorers = { "knn", "histogram", "mahalanobis" };
  std::size_t knn_k = 5;
  std::size_t histogram_bins = 10;
  double mahalanobis_ridge = 1e-6;
  WeightSpec weights;

  //! Throws ConfigError on any violated constraint.
  void validate() const;
};

//! Parses a JSON spec. Every key is optional except where noted in the
//! README; unknown keys raise ConfigError naming the key.
ExperimentSpec parse_spec(const nlohmann::ordered_json& j);
ExperimentSpec read_spec(const std::filesystem::path& path);
nlohmann::ordered_json spec_to_json(const ExperimentSpec& spec);

//! Seed of trial `seed_index`: derive_seed(master_seed, {seed_index}).
std::uint64_t trial_seed(const ExperimentSpec& spec, std::size_t seed_index);

//! One synthetic problem. `*_raw` are generator coordinates; the other
//! matrices are z-scored with parameters fitted on `train_raw`.
struct Problem
{
  FeatureMatrix train_raw, val_raw, calib_raw, test_raw;
  FeatureMatrix train, val, calib, test;
  std::vector<Label> val_labels;
  std::vector<Label> test_labels;
};

//! Draws all splits from `seed`. Train and calibration rows are inliers; the
//! validation split carries anomalies at the spec rate with at least one of
//! each class; test anomalies are Bernoulli(anomaly_rate) per row.
Problem generate_problem(const ExperimentSpec& spec, std::uint64_t seed);

//! Inlier density of the generator at x (no shift).
double inlier_density(const ExperimentSpec& spec, std::span<const double> x);

//! True likelihood ratio of shifted to unshifted inliers at x (raw coordinates).
double true_weight(const ExperimentSpec& spec, std::span<const double> x);

std::unique_ptr<Scorer> make_scorer(const ExperimentSpec& spec,
                                    std::string_view name,
                                    const FeatureMatrix& train);

struct PhaseOneResult
{
  std::string selected;
  std::vector<ModelCandidate> candidates;
  //! Validation lacked a class or no candidate could be scored; the first
  //! listed scorer was used.
  bool fallback = false;
};

//! Fits every configured scorer on the training split, ranks them on the
//! validation split (PR-AUC, then ROC-AUC, then Brier) and returns the winner.
PhaseOneResult run_phase1(const ExperimentSpec& spec, const Problem& problem);
PhaseOneResult run_phase1(const ExperimentSpec& spec, std::size_t seed_index);

struct TrialResult
{
  std::string dataset;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  Method method = Method::edf;
  //! Empty for BH (unweighted) rows.
  std::optional<Pruning> pruning;
  std::string scorer;
  double fdp = 0.0;
  std::optional<double> power;
  std::size_t n_rejected = 0;
  std::size_t n_anomalies = 0;
  //! Kish effective size of the calibration weights the method consumed.
  double n_eff = 0.0;
  //! Largest deterministic floor w_j / W_total over the test batch; 0 for KDE.
  double floor_max = 0.0;
  double min_p = 0.0;
  //! Hash of the weight profile consumed; 0 for unweighted methods.
  std::uint64_t weights_hash = 0;
  double alpha = 0.0;
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
};

//! Weights and p-values computed for one trial, exposed for inspection.
struct TrialArtifacts
{
  std::vector<double> calib_scores;
  std::vector<double> test_scores;
  std::vector<double> calib_weights;
  std::vector<double> test_weights;
  std::uint64_t weights_hash = 0;
};

//! Phase 2: scores calibration and test rows, estimates one weight profile
//! shared by every weighted method, builds the requested p-values and applies
//! BH (unweighted) or WCS (weighted). One row per method and pruning.
std::vector<TrialResult> run_phase2(const ExperimentSpec& spec,
                                    const Problem& problem,
                                    const Scorer& scorer,
                                    std::size_t seed_index,
                                    TrialArtifacts* artifacts = nullptr);

//! Generates the problem, runs both phases.
std::vector<TrialResult> run_trial(const ExperimentSpec& spec, std::size_t seed_index);

//! Rejection counts of one method on fixed data (trial `seed_index`) over
//! `n_draws` independent redraws of its auxiliary uniforms.
std::vector<std::size_t> redraw_rejection_counts(const ExperimentSpec& spec,
                                                 std::size_t seed_index,
                                                 Method method,
                                                 Pruning pruning,
                                                 std::size_t n_draws);

struct SummaryRow
{
  std::string dataset;
  Method method = Method::edf;
  std::optional<Pruning> pruning;
  double fdr_mean = 0.0;
  double fdr_sd = 0.0;
  //! Over trials with at least one anomaly; empty if there were none.
  std::optional<double> power_mean;
  double power_sd = 0.0;
  std::size_t n_power = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_trials = 0;
  double alpha = 0.0;
  double fdr_bound = 0.0;
  bool valid = false;
  bool valid_raw = false;
  double mean_n_eff = 0.0;
  double mean_rejected = 0.0;
};

//! Groups rows by (dataset, method, pruning) in canonical order and applies
//! the validity rule per group.
std::vector<SummaryRow> summarize(const std::vector<TrialResult>& rows);

struct ExperimentResult
{
  ExperimentSpec spec;
  std::vector<TrialResult> rows;
  std::vector<SummaryRow> summary;
};

//! Runs all seeds (concurrently when threads allow) and aggregates.
ExperimentResult run_experiment(const ExperimentSpec& spec);

std::string results_to_csv(const std::vector<TrialResult>& rows);
std::vector<TrialResult> parse_results_csv(std::string_view text);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);
nlohmann::ordered_json summary_to_json(const std::vector<SummaryRow>& rows);

//! Writes results.csv, summary.csv and summary.json into `out_dir`.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

} // namespace confshift::sim

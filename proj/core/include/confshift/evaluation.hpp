#pragma once

#include "confshift/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace confshift {

//! |R ∩ H0| / max(1, |R|). Throws DomainError on out-of-range indices.
double fdp(std::span<const std::size_t> rejected, std::span<const Label> labels);

//! |R ∩ H1| / |H1|; empty when there are no anomalies.
std::optional<double> power(std::span<const std::size_t> rejected, std::span<const Label> labels);

struct TrialMetrics
{
  double fdp = 0.0;
  std::optional<double> power;
  std::size_t n_rejected = 0;
  std::size_t n_anomalies = 0;
};

TrialMetrics trial_metrics(std::span<const std::size_t> rejected, std::span<const Label> labels);

//! Mean and sample standard deviation (n - 1 denominator; 0 for n = 1).
struct MeanSd
{
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

MeanSd mean_sd(std::span<const double> values);

//! sd / mean with the sample sd; 0 when all values are equal, +inf when the
//! mean is 0 but the values vary.
double coefficient_of_variation(std::span<const double> values);

//! Upper 0.995 quantile of Student's t with `df` degrees of freedom.
double t_quantile_995(std::size_t df);

struct ValiditySummary
{
  double mean_fdp = 0.0;
  double sd_fdp = 0.0;
  std::size_t n_trials = 0;
  double alpha = 0.0;
  //! alpha + t_{0.995, n-1} sd / sqrt(n).
  double bound = 0.0;
  //! mean_fdp <= bound.
  bool valid = false;
  //! mean_fdp <= alpha, reported alongside the interval rule.
  bool valid_raw = false;
};

//! One-sided t-interval validity rule; needs at least two trials.
ValiditySummary validity(std::span<const double> fdps, double alpha);

//! Same rule without the n >= 2 precondition: with one trial sd = 0 and the
//! bound reduces to alpha.
ValiditySummary validity_lenient(std::span<const double> fdps, double alpha);

//! Mann-Whitney ROC-AUC with midranks for ties.
double roc_auc(std::span<const double> scores, std::span<const Label> labels);

//! Step-wise average precision: sum over distinct thresholds of
//! (recall gain) x precision.
double pr_auc(std::span<const double> scores, std::span<const Label> labels);

//! Mean squared error between min-max normalized scores and labels; scores
//! that are all equal map to 0.5.
double brier_score(std::span<const double> scores, std::span<const Label> labels);

struct ClassificationMetrics
{
  double pr_auc = 0.0;
  double roc_auc = 0.0;
  double brier = 0.0;
};

//! Requires both classes (DomainError otherwise).
ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             std::span<const Label> labels);

struct ModelCandidate
{
  std::string name;
  ClassificationMetrics metrics;
};

//! Argmax of (pr_auc, roc_auc, -brier) in lexicographic order; exact ties
//! go to the earliest candidate.
std::size_t lexicographic_select(std::span<const ModelCandidate> candidates);

struct CurvePoint
{
  double u = 0.0;
  double cdf = 0.0;
};

//! Empirical P(p <= u) at every grid point; grid values must lie in (0, 1).
std::vector<CurvePoint> superuniformity_curve(std::span<const double> pvalues,
                                              std::span<const double> grid);

//! The 99-point grid 0.01, 0.02, ..., 0.99.
std::vector<double> percent_grid();

//! sup_u |F_n(u) - u| for a sample on [0, 1].
double ks_statistic_uniform(std::span<const double> sample);

//! sup_x |F_a(x) - G_b(x)|.
double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b);

//! Asymptotic Kolmogorov tail P(K > lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

//! Asymptotic p-value of a one-sample statistic d with n observations,
//! using the small-sample adjustment lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) d.
double ks_pvalue(double d, std::size_t n);

//! Two-sample p-value with effective size n_a n_b / (n_a + n_b).
double ks_pvalue_two_sample(double d, std::size_t n_a, std::size_t n_b);

} // namespace confshift

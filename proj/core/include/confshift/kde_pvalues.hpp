#pragma once

#include "confshift/types.hpp"

#include <span>
#include <vector>

namespace confshift {

//! Weighted Gaussian KDE over calibration scores,
//! f(s) = 1 / (h sum_k w_k) * sum_i w_i K((s - s_i) / h).
struct WeightedKde
{
  std::vector<double> support_scores;
  //! w_i / sum_k w_k
  std::vector<double> norm_weights;
  double bandwidth = 1.0;
  //! Set when bandwidth selection fell back to the minimum bandwidth.
  bool degenerate = false;

  double pdf(double s) const;
  double cdf(double s) const;
  //! Right-tail mass above s.
  double survival(double s) const;
};

WeightedKde fit_weighted_kde(std::span<const double> scores,
                             std::span<const double> weights,
                             double bandwidth);

//! max(1e-6, 1e-4 * (max score - min score)).
double min_bandwidth(std::span<const double> scores);

//! 1.06 * weighted sd * N_eff^(-1/5).
double silverman_bandwidth(std::span<const double> scores, std::span<const double> weights);

//! 25 log-spaced candidates over [0.1, 10] x the Silverman reference,
//! raised to min_bandwidth where needed.
std::vector<double> default_bandwidth_grid(std::span<const double> scores,
                                           std::span<const double> weights);

struct BandwidthSelection
{
  double chosen = 0.0;
  std::vector<double> grid;
  std::vector<double> loo_loglik;
  bool degenerate = false;
};

//! Weighted leave-one-out log-likelihood of one bandwidth:
//! sum_i (w_i / sum w) log f_{-i}(s_i), each f_{-i} renormalized over the
//! remaining weights.
double loo_log_likelihood(std::span<const double> scores,
                          std::span<const double> weights,
                          double bandwidth);

//! Maximizes the LOO log-likelihood over `grid`; ties go to the smaller
//! bandwidth. Fewer than two distinct scores force min_bandwidth with the
//! degenerate flag set.
BandwidthSelection select_bandwidth_loo(std::span<const double> scores,
                                        std::span<const double> weights,
                                        std::span<const double> grid);

//! Default grid + LOO selection + fit.
WeightedKde fit_weighted_kde_auto(std::span<const double> scores, std::span<const double> weights);

//! 1 - sum_i (w_i / sum w) Phi((s - s_i) / h), clamped to [0, 1].
double kde_pvalue(const WeightedKde& kde, double test_score);

PValueVector kde_pvalue_batch(const WeightedKde& kde, std::span<const double> test_scores);

} // namespace confshift

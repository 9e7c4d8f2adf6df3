#pragma once

#include "confshift/types.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace confshift {

// Weighted conformal p-values for right-tail anomaly scores.
//
// W_total = sum_i w_i + w_j includes the test point's own weight. Ties are
// exact floating-point equality: 1[s_i = s_j] is never widened by a
// tolerance, because the tie mass directly sets the randomization width.

//! Deterministic p-value: (sum_i w_i 1[s_i >= s_j] + w_j) / W_total.
double discrete_pvalue(std::span<const double> calib_scores,
                       std::span<const double> calib_weights,
                       double test_score,
                       double test_weight);

//! Randomized p-value:
//! sum_i w_i 1[s_i > s_j] / W_total + u (w_j + sum_i w_i 1[s_i = s_j]) / W_total.
//! u in [0, 1] is supplied by the caller.
double randomized_pvalue(std::span<const double> calib_scores,
                         std::span<const double> calib_weights,
                         double test_score,
                         double test_weight,
                         double u);

//! Floor, randomization width and detectability of one test point.
struct TailDiagnostics
{
  //! w_j / W_total, the smallest attainable deterministic p-value.
  double floor = 0.0;
  //! (w_j + W_=(s_j)) / W_total.
  double width = 0.0;
  //! Strict-exceedance mass; the randomized p-value is uniform on [lower, lower + width].
  double lower = 0.0;
  //! width^2 / 12.
  double cond_variance = 0.0;
  //! delta_j(r) = floor / ((r / m) alpha) per putative rejection count r.
  std::map<std::size_t, double> detectability;
};

TailDiagnostics tail_diagnostics(std::span<const double> calib_scores,
                                 std::span<const double> calib_weights,
                                 double test_score,
                                 double test_weight,
                                 std::size_t m,
                                 double alpha,
                                 std::span<const std::size_t> r_set);

//! Deterministic p-values for a test batch.
PValueVector discrete_pvalues(std::span<const double> calib_scores,
                              std::span<const double> calib_weights,
                              std::span<const double> test_scores,
                              std::span<const double> test_weights);

//! Randomized p-values; U_j is the j-th uniform draw of Rng(seed).
PValueVector randomized_pvalues(std::span<const double> calib_scores,
                                std::span<const double> calib_weights,
                                std::span<const double> test_scores,
                                std::span<const double> test_weights,
                                std::uint64_t seed);

//! Randomized p-values with caller-supplied U_j.
PValueVector randomized_pvalues(std::span<const double> calib_scores,
                                std::span<const double> calib_weights,
                                std::span<const double> test_scores,
                                std::span<const double> test_weights,
                                std::span<const double> u);

std::vector<double> unit_weights(std::size_t n);

} // namespace confshift

#pragma once

#include "confshift/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace confshift {

enum class Procedure
{
  bh,
  wcs_det,
  wcs_hom,
  wcs_het
};

enum class Pruning
{
  deterministic,
  homogeneous,
  heterogeneous
};

std::string_view to_string(Procedure p);
std::string_view to_string(Pruning p);
Procedure parse_procedure(std::string_view s);
//! Accepts the full names and the short forms det, hom, het.
Pruning parse_pruning(std::string_view s);
Procedure wcs_procedure(Pruning p);

//! Rejection set of one multiple-testing run. Indices are 0-based positions
//! in the p-value vector, sorted ascending.
struct DecisionReport
{
  std::vector<std::size_t> rejected;
  Procedure procedure = Procedure::bh;
  double alpha = 0.0;
  //! Final p-value cutoff alpha * |rejected| / m.
  double threshold = 0.0;
  std::size_t m = 0;
  std::optional<std::uint64_t> prune_seed;
  //! WCS runs use the self-consistency fixed point, not the full
  //! leave-one-out auxiliary p-values; reports say so.
  bool wcs_approx = false;
};

//! Step-up rule: reject the k smallest p-values, k = max{r : p_(r) <= alpha r / m}.
DecisionReport benjamini_hochberg(std::span<const double> p, double alpha);

struct WcsSelection
{
  //! S = {j : p_j <= alpha R* / m}, sorted ascending.
  std::vector<std::size_t> candidates;
  //! R* = max{r : #{j : p_j <= alpha r / m} >= r}, or 0.
  std::size_t r_star = 0;
};

WcsSelection wcs_select(std::span<const double> p, double alpha);

//! Second WCS stage. Leaves S untouched when |S| <= R*; otherwise ranks the
//! members of S by p-value (ties by index, rank 1 = smallest) and keeps
//!   deterministic:   r_j <= R*
//!   homogeneous:     r_j - xi < R*, one xi ~ U[0,1) for the batch
//!   heterogeneous:   r_j - xi_j < R*, xi_j ~ U[0,1) per member.
//! Randomized strategies require a seed (ConfigError otherwise).
DecisionReport wcs_prune(const WcsSelection& selection,
                         std::span<const double> p,
                         double alpha,
                         Pruning strategy,
                         std::optional<std::uint64_t> seed);

//! wcs_select followed by wcs_prune.
DecisionReport weighted_conformal_selection(std::span<const double> p,
                                            double alpha,
                                            Pruning strategy,
                                            std::optional<std::uint64_t> seed);

} // namespace confshift

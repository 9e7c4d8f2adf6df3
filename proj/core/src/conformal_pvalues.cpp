#include "confshift/conformal_pvalues.hpp"

#include "confshift/errors.hpp"
#include "confshift/random.hpp"

#include <cmath>
#include <string>

namespace confshift {

namespace {

void
check_inputs(std::span<const double> calib_scores,
             std::span<const double> calib_weights,
             double test_score,
             double test_weight)
{
  if (calib_scores.empty())
    throw DomainError("conformal p-value needs a nonempty calibration set");
  if (calib_scores.size() != calib_weights.size())
    throw ConfigError("calibration scores and weights differ in length");
  if (!std::isfinite(test_score))
    throw DomainError("test score is not finite");
  if (!(test_weight > 0.0) || !std::isfinite(test_weight))
    throw DomainError("test weight must be positive and finite");
  for (std::size_t i = 0; i < calib_scores.size(); ++i) {
    if (!std::isfinite(calib_scores[i]))
      throw DomainError("calibration score " + std::to_string(i) + " is not finite");
    if (!(calib_weights[i] > 0.0) || !std::isfinite(calib_weights[i]))
      throw DomainError("calibration weight " + std::to_string(i) + " must be positive and finite");
  }
}

// Sums run in extended precision so each p-value is rounded once.
struct TailMass
{
  long double above = 0.0L; // sum w_i 1[s_i > s_j]
  long double tied = 0.0L;  // sum w_i 1[s_i = s_j]
  long double total = 0.0L; // sum w_i + w_j
};

TailMass
tail_mass(std::span<const double> calib_scores,
          std::span<const double> calib_weights,
          double test_score,
          double test_weight)
{
  TailMass m;
  long double calib_total = 0.0L;
  for (std::size_t i = 0; i < calib_scores.size(); ++i) {
    calib_total += calib_weights[i];
    if (calib_scores[i] > test_score)
      m.above += calib_weights[i];
    else if (calib_scores[i] == test_score)
      m.tied += calib_weights[i];
  }
  m.total = calib_total + test_weight;
  return m;
}

void
check_batch(std::span<const double> test_scores, std::span<const double> test_weights)
{
  if (test_scores.size() != test_weights.size())
    throw ConfigError("test scores and weights differ in length");
}

} // namespace

double
discrete_pvalue(std::span<const double> calib_scores,
                std::span<const double> calib_weights,
                double test_score,
                double test_weight)
{
  check_inputs(calib_scores, calib_weights, test_score, test_weight);
  const auto m = tail_mass(calib_scores, calib_weights, test_score, test_weight);
  return static_cast<double>((m.above + m.tied + test_weight) / m.total);
}

double
randomized_pvalue(std::span<const double> calib_scores,
                  std::span<const double> calib_weights,
                  double test_score,
                  double test_weight,
                  double u)
{
  if (!(u >= 0.0 && u <= 1.0))
    throw DomainError("randomization variable u must lie in [0, 1]");
  check_inputs(calib_scores, calib_weights, test_score, test_weight);
  const auto m = tail_mass(calib_scores, calib_weights, test_score, test_weight);
  return static_cast<double>((m.above + u * (test_weight + m.tied)) / m.total);
}

TailDiagnostics
tail_diagnostics(std::span<const double> calib_scores,
                 std::span<const double> calib_weights,
                 double test_score,
                 double test_weight,
                 std::size_t m,
                 double alpha,
                 std::span<const std::size_t> r_set)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("alpha must lie in (0, 1)");
  for (auto r : r_set)
    if (r < 1 || r > m)
      throw DomainError("putative rejection count must lie in [1, m]");
  check_inputs(calib_scores, calib_weights, test_score, test_weight);

  const auto mass = tail_mass(calib_scores, calib_weights, test_score, test_weight);
  TailDiagnostics d;
  d.floor = static_cast<double>(test_weight / mass.total);
  d.width = static_cast<double>((test_weight + mass.tied) / mass.total);
  d.lower = static_cast<double>(mass.above / mass.total);
  d.cond_variance = d.width * d.width / 12.0;
  for (auto r : r_set)
    d.detectability[r] = d.floor / ((static_cast<double>(r) / static_cast<double>(m)) * alpha);
  return d;
}

PValueVector
discrete_pvalues(std::span<const double> calib_scores,
                 std::span<const double> calib_weights,
                 std::span<const double> test_scores,
                 std::span<const double> test_weights)
{
  check_batch(test_scores, test_weights);
  PValueVector out;
  out.method = PValueMethod::discrete;
  out.values.resize(test_scores.size());
  for (std::size_t j = 0; j < test_scores.size(); ++j)
    out.values[j] = discrete_pvalue(calib_scores, calib_weights, test_scores[j], test_weights[j]);
  return out;
}

PValueVector
randomized_pvalues(std::span<const double> calib_scores,
                   std::span<const double> calib_weights,
                   std::span<const double> test_scores,
                   std::span<const double> test_weights,
                   std::span<const double> u)
{
  check_batch(test_scores, test_weights);
  if (u.size() != test_scores.size())
    throw ConfigError("one randomization draw per test point is required");
  PValueVector out;
  out.method = PValueMethod::randomized;
  out.values.resize(test_scores.size());
  for (std::size_t j = 0; j < test_scores.size(); ++j)
    out.values[j] = randomized_pvalue(calib_scores, calib_weights, test_scores[j], test_weights[j], u[j]);
  return out;
}

PValueVector
randomized_pvalues(std::span<const double> calib_scores,
                   std::span<const double> calib_weights,
                   std::span<const double> test_scores,
                   std::span<const double> test_weights,
                   std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<double> u(test_scores.size());
  for (auto& v : u)
    v = rng.uniform();
  auto out = randomized_pvalues(calib_scores, calib_weights, test_scores, test_weights, u);
  out.seed = seed;
  return out;
}

std::vector<double>
unit_weights(std::size_t n)
{
  return std::vector<double>(n, 1.0);
}

} // namespace confshift

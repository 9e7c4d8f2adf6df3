#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace confshift {

//! Ground-truth status of a test instance.
enum class Label : std::uint8_t
{
  inlier = 0,
  anomaly = 1
};

//! Calibration and test anomaly scores; larger means more anomalous.
struct ScoreBatch
{
  std::vector<double> calib_scores;
  std::vector<double> test_scores;
  std::optional<std::vector<Label>> test_labels;

  //! Throws DomainError on non-finite scores, ConfigError on label length mismatch.
  void validate() const;
};

enum class PValueMethod
{
  discrete,
  randomized,
  kde
};

std::string_view to_string(PValueMethod m);
PValueMethod parse_pvalue_method(std::string_view s);

//! Per-test-point p-values tagged with how they were built.
struct PValueVector
{
  std::vector<double> values;
  PValueMethod method = PValueMethod::discrete;
  //! Set for randomized p-values only.
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return values.size(); }
};

} // namespace confshift

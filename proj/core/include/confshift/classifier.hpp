#pragma once

#include "confshift/feature_matrix.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace confshift {

enum class ClassifierKind
{
  logistic,
  forest
};

std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

//! Probabilistic classifier separating calibration rows (Y = 0) from test
//! rows (Y = 1). Predictions are clamped to [p_min, 1 - p_min].
class ClassifierModel
{
public:
  static constexpr double p_min = 1e-6;

  //! Built-in forest shape.
  static constexpr std::size_t forest_trees = 25;
  static constexpr std::size_t forest_depth = 4;
  //! Inverse L2 strength of the logistic model (penalty 0.5 * |beta|^2 / C).
  static constexpr double logistic_c = 1.0;

  //! Clamped P(Y = 1 | z).
  double predict(std::span<const double> z) const;

  ClassifierKind kind() const { return kind_; }
  std::size_t n_calib() const { return n_calib_; }
  std::size_t n_test() const { return n_test_; }

  //! N_cal / N_test of the training composition.
  double prior_ratio() const
  {
    return static_cast<double>(n_calib_) / static_cast<double>(n_test_);
  }

  //! Logistic coefficients (intercept first); empty for forests.
  const std::vector<double>& coefficients() const { return coef_; }

private:
  friend ClassifierModel fit_probabilistic_classifier(const FeatureMatrix&,
                                                      const FeatureMatrix&,
                                                      ClassifierKind,
                                                      std::uint64_t);

  struct Node
  {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prob = 0.0;
  };

  double raw_predict(std::span<const double> z) const;

  ClassifierKind kind_ = ClassifierKind::logistic;
  std::size_t n_calib_ = 0;
  std::size_t n_test_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> coef_;
  std::vector<std::vector<Node>> trees_;
};

//! Fits the calibration-vs-test classifier. Deterministic given `seed`
//! (the logistic model ignores it).
ClassifierModel fit_probabilistic_classifier(const FeatureMatrix& calib,
                                             const FeatureMatrix& test,
                                             ClassifierKind kind,
                                             std::uint64_t seed);

} // namespace confshift

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace confshift {

//! Dense row-major matrix of finite feature values.
class FeatureMatrix
{
public:
  FeatureMatrix() = default;

  //! Zero-filled matrix; cols must be >= 1.
  FeatureMatrix(std::size_t rows, std::size_t cols);

  //! Takes ownership of row-major values; validates shape and finiteness.
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  //! Builds from nested rows, e.g. {{0.0}, {1.0}}.
  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const
  {
    return { values_.data() + i * cols_, cols_ };
  }
  std::span<double> row(std::size_t i) { return { values_.data() + i * cols_, cols_ }; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<double>& values() const { return values_; }

  //! Appends a row; the first row fixes the column count of an empty matrix.
  void append_row(std::span<const double> row);

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  //! Row-wise concatenation; column counts must agree.
  static FeatureMatrix vstack(const FeatureMatrix& top, const FeatureMatrix& bottom);

  std::vector<std::string> column_names;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

//! z-score standardization with parameters fitted on one split and applied to any.
class Standardizer
{
public:
  static Standardizer fit(const FeatureMatrix& train);

  FeatureMatrix apply(const FeatureMatrix& x) const;

  const std::vector<double>& mean() const { return mean_; }
  //! Per-feature sample standard deviation; constant features keep scale 1.
  const std::vector<double>& scale() const { return scale_; }

private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

//! Reads a feature CSV: header of feature names, all-numeric body.
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

std::string write_feature_csv(const FeatureMatrix& x);

} // namespace confshift

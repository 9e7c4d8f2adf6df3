#include "confshift/feature_matrix.hpp"

#include "confshift/csv.hpp"
#include "confshift/errors.hpp"

#include <cmath>

namespace confshift {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
  : rows_(rows)
  , cols_(cols)
  , values_(rows * cols, 0.0)
{
  if (cols == 0)
    throw ConfigError("feature matrix needs at least one column");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
  : rows_(rows)
  , cols_(cols)
  , values_(std::move(values))
{
  if (cols == 0)
    throw ConfigError("feature matrix needs at least one column");
  if (values_.size() != rows * cols)
    throw ConfigError("feature matrix value count does not match rows * cols");
  for (double v : values_)
    if (!std::isfinite(v))
      throw DomainError("feature matrix contains a non-finite value");
}

FeatureMatrix
FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows)
{
  FeatureMatrix m;
  for (const auto& r : rows)
    m.append_row(r);
  return m;
}

void
FeatureMatrix::append_row(std::span<const double> row)
{
  if (cols_ == 0) {
    if (row.empty())
      throw ConfigError("feature matrix needs at least one column");
    cols_ = row.size();
  }
  if (row.size() != cols_)
    throw ConfigError("row length " + std::to_string(row.size()) + " does not match " +
                      std::to_string(cols_) + " columns");
  for (double v : row)
    if (!std::isfinite(v))
      throw DomainError("feature matrix contains a non-finite value");
  values_.insert(values_.end(), row.begin(), row.end());
  ++rows_;
}

FeatureMatrix
FeatureMatrix::select_rows(std::span<const std::size_t> indices) const
{
  FeatureMatrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= rows_)
      throw ConfigError("row index out of range");
    const auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  out.column_names = column_names;
  return out;
}

FeatureMatrix
FeatureMatrix::vstack(const FeatureMatrix& top, const FeatureMatrix& bottom)
{
  if (top.cols() != bottom.cols())
    throw ConfigError("cannot stack matrices with " + std::to_string(top.cols()) + " and " +
                      std::to_string(bottom.cols()) + " columns");
  std::vector<double> values;
  values.reserve(top.values_.size() + bottom.values_.size());
  values.insert(values.end(), top.values_.begin(), top.values_.end());
  values.insert(values.end(), bottom.values_.begin(), bottom.values_.end());
  FeatureMatrix out(top.rows() + bottom.rows(), top.cols(), std::move(values));
  out.column_names = top.column_names;
  return out;
}

Standardizer
Standardizer::fit(const FeatureMatrix& train)
{
  if (train.empty())
    throw ConfigError("cannot fit standardization on an empty matrix");
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  Standardizer s;
  s.mean_.assign(d, 0.0);
  s.scale_.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      s.mean_[j] += train(i, j);
  for (auto& m : s.mean_)
    m /= static_cast<double>(n);
  if (n > 1) {
    std::vector<double> ss(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = train(i, j) - s.mean_[j];
        ss[j] += dev * dev;
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(ss[j] / static_cast<double>(n - 1));
      s.scale_[j] = sd > 0.0 ? sd : 1.0;
    }
  }
  return s;
}

FeatureMatrix
Standardizer::apply(const FeatureMatrix& x) const
{
  if (x.cols() != mean_.size())
    throw ConfigError("standardizer fitted on " + std::to_string(mean_.size()) +
                      " columns, got " + std::to_string(x.cols()));
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out(i, j) = (out(i, j) - mean_[j]) / scale_[j];
  return out;
}

FeatureMatrix
read_feature_csv(const std::filesystem::path& path)
{
  const auto table = csv::read_table(path);
  if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
    throw ParseError(path.string() + ": empty header");
  const std::size_t d = table.header.size();
  std::vector<double> values;
  values.reserve(table.rows.size() * d);
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t j = 0; j < d; ++j)
      values.push_back(csv::parse_real(table.rows[r][j], r + 1, table.header[j]));
  FeatureMatrix m(table.rows.size(), d, std::move(values));
  m.column_names = table.header;
  return m;
}

std::string
write_feature_csv(const FeatureMatrix& x)
{
  std::string out;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (j)
      out += ',';
    out += j < x.column_names.size() ? x.column_names[j] : "x" + std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j)
        out += ',';
      out += csv::format_real(x(i, j));
    }
    out += '\n';
  }
  return out;
}

} // namespace confshift

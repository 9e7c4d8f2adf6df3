#include "confshift/scoring.hpp"

#include "confshift/csv.hpp"
#include "confshift/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace confshift {

void
ScoreBatch::validate() const
{
  for (std::size_t i = 0; i < calib_scores.size(); ++i)
    if (!std::isfinite(calib_scores[i]))
      throw DomainError("calibration score " + std::to_string(i) + " is not finite");
  for (std::size_t i = 0; i < test_scores.size(); ++i)
    if (!std::isfinite(test_scores[i]))
      throw DomainError("test score " + std::to_string(i) + " is not finite");
  if (test_labels && test_labels->size() != test_scores.size())
    throw ConfigError("label count " + std::to_string(test_labels->size()) +
                      " does not match test score count " + std::to_string(test_scores.size()));
}

std::string_view
to_string(PValueMethod m)
{
  switch (m) {
    case PValueMethod::discrete:
      return "discrete";
    case PValueMethod::randomized:
      return "randomized";
    case PValueMethod::kde:
      return "kde";
  }
  return "unknown";
}

PValueMethod
parse_pvalue_method(std::string_view s)
{
  if (s == "discrete")
    return PValueMethod::discrete;
  if (s == "randomized")
    return PValueMethod::randomized;
  if (s == "kde")
    return PValueMethod::kde;
  throw ConfigError("unknown p-value method '" + std::string(s) + "'");
}

std::vector<double>
Scorer::score_all(const FeatureMatrix& x) const
{
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    out[i] = score(x.row(i));
  return out;
}

void
Scorer::check_width(std::span<const double> x, std::size_t cols) const
{
  if (x.size() != cols)
    throw ConfigError(std::string(name()) + " scorer expects " + std::to_string(cols) +
                      " features, got " + std::to_string(x.size()));
}

// ---------------------------------------------------------------- kNN

KnnScorer::KnnScorer(FeatureMatrix train, std::size_t k)
  : train_(std::move(train))
  , k_(k)
{
  if (k_ == 0)
    throw ConfigError("knn scorer needs k >= 1");
  if (k_ > train_.rows())
    throw ConfigError("knn scorer needs k <= number of training rows (k=" + std::to_string(k_) +
                      ", n=" + std::to_string(train_.rows()) + ")");
}

double
KnnScorer::score(std::span<const double> x) const
{
  check_width(x, train_.cols());
  std::vector<double> dist(train_.rows());
  for (std::size_t i = 0; i < train_.rows(); ++i) {
    const auto r = train_.row(i);
    double ss = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double d = x[j] - r[j];
      ss += d * d;
    }
    dist[i] = std::sqrt(ss);
  }
  const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k_);
  std::nth_element(dist.begin(), kth - 1, dist.end());
  std::sort(dist.begin(), kth);
  double sum = 0.0;
  for (auto it = dist.begin(); it != kth; ++it)
    sum += *it;
  return sum / static_cast<double>(k_);
}

KnnScorer
fit_knn_scorer(const FeatureMatrix& train, std::size_t k)
{
  return KnnScorer(train, k);
}

// ---------------------------------------------------------------- histogram

HistogramScorer::HistogramScorer(const FeatureMatrix& train, std::size_t bins)
  : bins_(bins)
{
  if (bins < 2)
    throw ConfigError("histogram scorer needs at least 2 bins");
  if (train.empty())
    throw ConfigError("histogram scorer needs training rows");
  const std::size_t n = train.rows();
  hists_.resize(train.cols());
  for (std::size_t j = 0; j < train.cols(); ++j) {
    auto& h = hists_[j];
    double lo = train(0, j), hi = train(0, j);
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, train(i, j));
      hi = std::max(hi, train(i, j));
    }
    if (!(hi > lo)) {
      h.constant = true;
      continue;
    }
    h.lo = lo;
    h.width = (hi - lo) / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto b = static_cast<long long>(std::floor((train(i, j) - lo) / h.width));
      b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    h.density.resize(bins);
    for (std::size_t b = 0; b < bins; ++b)
      h.density[b] = counts[b] / (static_cast<double>(n) * h.width);
  }
}

double
HistogramScorer::feature_score(std::size_t feature, double value) const
{
  const auto& h = hists_.at(feature);
  if (h.constant)
    return 0.0;
  const double pos = std::floor((value - h.lo) / h.width);
  const auto last = static_cast<double>(bins_ - 1);
  const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, last));
  return -std::log(h.density[b] + density_eps);
}

double
HistogramScorer::score(std::span<const double> x) const
{
  check_width(x, hists_.size());
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    s += feature_score(j, x[j]);
  return s;
}

HistogramScorer
fit_histogram_scorer(const FeatureMatrix& train, std::size_t bins)
{
  return HistogramScorer(train, bins);
}

// ---------------------------------------------------------------- Mahalanobis

MahalanobisScorer::MahalanobisScorer(const FeatureMatrix& train, double ridge)
  : dim_(train.cols())
{
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw ConfigError("mahalanobis ridge must be a nonnegative real");
  if (train.empty())
    throw ConfigError("mahalanobis scorer needs training rows");
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
    train.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (n > 1) {
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    cov = centered.transpose() * centered / static_cast<double>(n - 1);
  }
  cov.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12))
    throw NumericalError("mahalanobis covariance is singular; use ridge > 0 or more training rows");

  mean_.assign(mean.data(), mean.data() + d);
  const Eigen::MatrixXd lower = llt.matrixL();
  chol_lower_.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      chol_lower_[i * d + j] = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

double
MahalanobisScorer::score(std::span<const double> x) const
{
  check_width(x, dim_);
  // forward substitution L y = x - mean; distance = |y|
  std::vector<double> y(dim_);
  double ss = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    double v = x[i] - mean_[i];
    for (std::size_t j = 0; j < i; ++j)
      v -= chol_lower_[i * dim_ + j] * y[j];
    y[i] = v / chol_lower_[i * dim_ + i];
    ss += y[i] * y[i];
  }
  return std::sqrt(ss);
}

MahalanobisScorer
fit_mahalanobis_scorer(const FeatureMatrix& train, double ridge)
{
  return MahalanobisScorer(train, ridge);
}

// ---------------------------------------------------------------- ingestion

ScoreBatch
parse_scores_csv(std::string_view text)
{
  const auto table = csv::parse_table(text);
  const auto score_col = table.column("score");
  if (!score_col)
    throw ParseError("score file has no 'score' column");
  const auto label_col = table.column("label");
  const auto split_col = table.column("split");

  ScoreBatch batch;
  std::vector<Label> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    const double s = csv::parse_real(row[*score_col], row_no, "score");
    bool is_calib = false;
    if (split_col) {
      const auto& v = row[*split_col];
      if (v == "calib")
        is_calib = true;
      else if (v != "test")
        throw ParseError("row " + std::to_string(row_no) + ": split must be 'calib' or 'test', got '" +
                         v + "'");
    }
    if (is_calib) {
      batch.calib_scores.push_back(s);
      continue;
    }
    batch.test_scores.push_back(s);
    if (label_col) {
      const auto& v = row[*label_col];
      if (v == "0")
        labels.push_back(Label::inlier);
      else if (v == "1")
        labels.push_back(Label::anomaly);
      else
        throw ParseError("row " + std::to_string(row_no) + ": label must be 0 or 1, got '" + v + "'");
    }
  }
  if (label_col)
    batch.test_labels = std::move(labels);
  batch.validate();
  return batch;
}

ScoreBatch
ingest_scores(const std::filesystem::path& path, ScoreFormat format)
{
  if (format != ScoreFormat::csv)
    throw ConfigError("unsupported score format");
  const auto table_text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }();
  try {
    return parse_scores_csv(table_text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

} // namespace confshift

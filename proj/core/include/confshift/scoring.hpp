#pragma once

#include "confshift/feature_matrix.hpp"
#include "confshift/types.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace confshift {

//! A fitted anomaly scorer. Implementations are immutable after fitting,
//! so concurrent scoring from several threads is safe.
class Scorer
{
public:
  virtual ~Scorer() = default;

  //! Anomaly score of one feature vector; larger = more anomalous.
  virtual double score(std::span<const double> x) const = 0;
  virtual std::string_view name() const = 0;

  std::vector<double> score_all(const FeatureMatrix& x) const;

protected:
  void check_width(std::span<const double> x, std::size_t cols) const;
};

//! Mean Euclidean distance to the k nearest training rows.
class KnnScorer final : public Scorer
{
public:
  KnnScorer(FeatureMatrix train, std::size_t k);

  double score(std::span<const double> x) const override;
  std::string_view name() const override { return "knn"; }
  std::size_t k() const { return k_; }

private:
  FeatureMatrix train_;
  std::size_t k_;
};

//! HBOS-style score: sum over features of -log(bin density + eps) on
//! equal-width training histograms. Queries outside the training range
//! fall into the nearest edge bin; constant features contribute 0.
class HistogramScorer final : public Scorer
{
public:
  static constexpr double density_eps = 1e-12;

  HistogramScorer(const FeatureMatrix& train, std::size_t bins);

  double score(std::span<const double> x) const override;
  std::string_view name() const override { return "histogram"; }

  //! Contribution of a single feature, exposed for additivity checks.
  double feature_score(std::size_t feature, double value) const;

private:
  struct Histogram
  {
    double lo = 0.0;
    double width = 0.0;
    bool constant = false;
    std::vector<double> density;
  };
  std::vector<Histogram> hists_;
  std::size_t bins_;
};

//! Mahalanobis distance to the training mean under covariance + ridge * I.
class MahalanobisScorer final : public Scorer
{
public:
  MahalanobisScorer(const FeatureMatrix& train, double ridge);

  double score(std::span<const double> x) const override;
  std::string_view name() const override { return "mahalanobis"; }

private:
  std::vector<double> mean_;
  //! Row-major lower Cholesky factor of the regularized covariance.
  std::vector<double> chol_lower_;
  std::size_t dim_ = 0;
};

KnnScorer fit_knn_scorer(const FeatureMatrix& train, std::size_t k);
HistogramScorer fit_histogram_scorer(const FeatureMatrix& train, std::size_t bins);
MahalanobisScorer fit_mahalanobis_scorer(const FeatureMatrix& train, double ridge);

enum class ScoreFormat
{
  csv
};

//! Reads a score CSV: required column `score`, optional `label` in {0,1}
//! (1 = anomaly) and optional `split` in {calib, test}. Without a split
//! column every row is a test score.
ScoreBatch ingest_scores(const std::filesystem::path& path, ScoreFormat format = ScoreFormat::csv);

//! Same as ingest_scores but from in-memory CSV text.
ScoreBatch parse_scores_csv(std::string_view text);

} // namespace confshift

#include "confshift/classifier.hpp"

#include "confshift/errors.hpp"
#include "confshift/random.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace confshift {

std::string_view
to_string(ClassifierKind k)
{
  return k == ClassifierKind::logistic ? "logistic" : "forest";
}

ClassifierKind
parse_classifier_kind(std::string_view s)
{
  if (s == "logistic")
    return ClassifierKind::logistic;
  if (s == "forest")
    return ClassifierKind::forest;
  throw ConfigError("unknown classifier '" + std::string(s) + "' (expected logistic or forest)");
}

namespace {

struct TrainingSet
{
  const FeatureMatrix* calib;
  const FeatureMatrix* test;

  std::size_t size() const { return calib->rows() + test->rows(); }
  std::size_t cols() const { return calib->cols(); }
  double x(std::size_t i, std::size_t j) const
  {
    return i < calib->rows() ? (*calib)(i, j) : (*test)(i - calib->rows(), j);
  }
  double y(std::size_t i) const { return i < calib->rows() ? 0.0 : 1.0; }
};

double
log1p_exp(double t)
{
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double
sigmoid(double t)
{
  if (t >= 0.0)
    return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// L2-regularized logistic regression by damped Newton iterations.
std::vector<double>
fit_logistic(const TrainingSet& data)
{
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(data.cols() + 1);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j)
      x(i, j) = data.x(static_cast<std::size_t>(i), static_cast<std::size_t>(j - 1));
    y(i) = data.y(static_cast<std::size_t>(i));
  }
  const double lambda = 1.0 / ClassifierModel::logistic_c;
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, lambda);
  penalty(0) = 0.0;

  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      loss += log1p_exp(eta(i)) - y(i) * eta(i);
    return loss + 0.5 * (penalty.array() * beta.array().square()).sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double prior = y.mean();
  beta(0) = std::log(prior / (1.0 - prior));
  double current = objective(beta);

  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(n), curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      curvature(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (prob - y) + (penalty.array() * beta.array()).matrix();
    Eigen::MatrixXd hess = x.transpose() * curvature.asDiagonal() * x;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);

    double scale = 1.0;
    Eigen::VectorXd candidate = beta - step;
    double value = objective(candidate);
    while (value > current && scale > 1e-8) {
      scale *= 0.5;
      candidate = beta - scale * step;
      value = objective(candidate);
    }
    if (value > current)
      break;
    beta = candidate;
    const bool converged = (scale * step).cwiseAbs().maxCoeff() < 1e-10 || current - value < 1e-14;
    current = value;
    if (converged)
      break;
  }
  return { beta.data(), beta.data() + beta.size() };
}

// Depth-limited Gini tree on a bootstrap sample, sqrt(d) candidate features per split.
class TreeBuilder
{
public:
  TreeBuilder(const TrainingSet& data, std::size_t max_depth, Rng& rng)
    : data_(data)
    , max_depth_(max_depth)
    , rng_(rng)
    , mtry_(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(data.cols())))))
  {}

  template<class NodeT>
  void build(std::vector<std::size_t> rows, std::vector<NodeT>& nodes)
  {
    grow(rows, 0, nodes);
  }

private:
  template<class NodeT>
  int grow(std::vector<std::size_t>& rows, std::size_t depth, std::vector<NodeT>& nodes)
  {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double positives = 0.0;
    for (auto r : rows)
      positives += data_.y(r);
    const double n = static_cast<double>(rows.size());
    nodes[static_cast<std::size_t>(id)].prob = positives / n;
    if (depth >= max_depth_ || rows.size() < 2 || positives == 0.0 || positives == n)
      return id;

    const auto split = best_split(rows);
    if (split.feature < 0)
      return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (data_.x(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(left, depth + 1, nodes);
    const int r = grow(right, depth + 1, nodes);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  struct Split
  {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  Split best_split(const std::vector<std::size_t>& rows)
  {
    const std::size_t d = data_.cols();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), std::size_t{ 0 });
    // partial Fisher-Yates: visit features in random order, stop after mtry
    // candidates once a valid split has been found
    Split best;
    std::vector<std::pair<double, double>> column(rows.size());
    double total_pos = 0.0;
    for (auto r : rows)
      total_pos += data_.y(r);
    const double n = static_cast<double>(rows.size());

    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t pick = k + rng_.uniform_index(d - k);
      std::swap(features[k], features[pick]);
      if (k >= mtry_ && best.feature >= 0)
        break;
      const std::size_t f = features[k];
      for (std::size_t i = 0; i < rows.size(); ++i)
        column[i] = { data_.x(rows[i], f), data_.y(rows[i]) };
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first)
          continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double pl = left_pos / nl;
        const double pr = (total_pos - left_pos) / nr;
        const double impurity = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
        if (best.feature < 0 || impurity < best.impurity) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.impurity = impurity;
        }
      }
    }
    return best;
  }

  const TrainingSet& data_;
  std::size_t max_depth_;
  Rng& rng_;
  std::size_t mtry_;
};

} // namespace

double
ClassifierModel::raw_predict(std::span<const double> z) const
{
  if (kind_ == ClassifierKind::logistic) {
    double eta = coef_[0];
    for (std::size_t j = 0; j < z.size(); ++j)
      eta += coef_[j + 1] * z[j];
    return sigmoid(eta);
  }
  double sum = 0.0;
  for (const auto& tree : trees_) {
    std::size_t at = 0;
    while (tree[at].feature >= 0)
      at = static_cast<std::size_t>(z[static_cast<std::size_t>(tree[at].feature)] <= tree[at].threshold
                                      ? tree[at].left
                                      : tree[at].right);
    sum += tree[at].prob;
  }
  return sum / static_cast<double>(trees_.size());
}

double
ClassifierModel::predict(std::span<const double> z) const
{
  if (z.size() != cols_)
    throw ConfigError("classifier expects " + std::to_string(cols_) + " features, got " +
                      std::to_string(z.size()));
  return std::clamp(raw_predict(z), p_min, 1.0 - p_min);
}

ClassifierModel
fit_probabilistic_classifier(const FeatureMatrix& calib,
                             const FeatureMatrix& test,
                             ClassifierKind kind,
                             std::uint64_t seed)
{
  if (calib.empty() || test.empty())
    throw ConfigError("classifier needs nonempty calibration and test matrices");
  if (calib.cols() != test.cols())
    throw ConfigError("calibration has " + std::to_string(calib.cols()) + " columns, test has " +
                      std::to_string(test.cols()));

  ClassifierModel model;
  model.kind_ = kind;
  model.n_calib_ = calib.rows();
  model.n_test_ = test.rows();
  model.cols_ = calib.cols();
  const TrainingSet data{ &calib, &test };

  if (kind == ClassifierKind::logistic) {
    model.coef_ = fit_logistic(data);
    return model;
  }

  const std::size_t n = data.size();
  model.trees_.resize(ClassifierModel::forest_trees);
  for (std::size_t t = 0; t < ClassifierModel::forest_trees; ++t) {
    Rng rng(derive_seed(seed, { t }));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows)
      r = rng.uniform_index(n);
    TreeBuilder builder(data, ClassifierModel::forest_depth, rng);
    builder.build(std::move(rows), model.trees_[t]);
  }
  return model;
}

} // namespace confshift

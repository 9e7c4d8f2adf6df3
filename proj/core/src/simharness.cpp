#include "confshift/simharness.hpp"

#include "confshift/conformal_pvalues.hpp"
#include "confshift/csv.hpp"
#include "confshift/errors.hpp"
#include "confshift/io.hpp"
#include "confshift/kde_pvalues.hpp"
#include "confshift/parallel.hpp"
#include "confshift/random.hpp"
#include "confshift/shift_weights.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

namespace confshift::sim {

using json = nlohmann::ordered_json;

namespace {

// Stream ids for derive_seed(trial_seed, {...}).
enum : std::uint64_t
{
  stream_problem = 1,
  stream_weights = 2,
  stream_pvalues = 3,
  stream_pruning = 4,
  stream_redraw = 5
};

// Stream ids for the splits inside generate_problem.
enum : std::uint64_t
{
  split_train = 1,
  split_val = 2,
  split_calib = 3,
  split_test = 4
};

std::uint64_t
method_id(Method m)
{
  return static_cast<std::uint64_t>(m) + 1;
}

std::uint64_t
pruning_id(Pruning p)
{
  return static_cast<std::uint64_t>(p) + 1;
}

// ---- spec parsing --------------------------------------------------------

void
reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
  if (!j.is_object())
    throw ConfigError((where.empty() ? std::string("spec") : where) + " must be an object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown spec key '" + where + key + "'");
  }
}

template<typename T>
void
read_key(const json& j, const char* key, T& out, const std::string& where)
{
  if (!j.contains(key))
    return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("spec key '" + where + key + "' has the wrong type");
  }
}

ShiftSpec
parse_shift(const json& j)
{
  reject_unknown_keys(j, { "type", "delta", "strength" }, "shift.");
  ShiftSpec s;
  std::string type = "none";
  read_key(j, "type", type, "shift.");
  if (type == "none") {
    s.kind = ShiftKind::none;
    if (j.contains("delta") || j.contains("strength"))
      throw ConfigError("shift type 'none' takes no parameters");
  } else if (type == "mean_shift") {
    s.kind = ShiftKind::mean_shift;
    if (j.contains("strength"))
      throw ConfigError("unknown spec key 'shift.strength' for mean_shift");
    read_key(j, "delta", s.delta, "shift.");
  } else if (type == "localization") {
    s.kind = ShiftKind::localization;
    if (j.contains("delta"))
      throw ConfigError("unknown spec key 'shift.delta' for localization");
    read_key(j, "strength", s.strength, "shift.");
  } else {
    throw ConfigError("unknown shift type '" + type + "'");
  }
  return s;
}

WeightSpec
parse_weights(const json& j)
{
  reject_unknown_keys(j, { "source", "classifier", "n_bootstrap", "gamma" }, "weights.");
  WeightSpec w;
  std::string source = "estimated";
  read_key(j, "source", source, "weights.");
  if (source == "estimated")
    w.source = WeightSource::estimated;
  else if (source == "oracle")
    w.source = WeightSource::oracle;
  else
    throw ConfigError("unknown weight source '" + source + "'");
  if (j.contains("classifier")) {
    std::string kind;
    read_key(j, "classifier", kind, "weights.");
    w.classifier = parse_classifier_kind(kind);
  }
  read_key(j, "n_bootstrap", w.n_bootstrap, "weights.");
  read_key(j, "gamma", w.gamma, "weights.");
  return w;
}

// ---- generator -----------------------------------------------------------

std::vector<double>
component_mean(const ExperimentSpec& spec, bool upper)
{
  std::vector<double> mu(spec.dim, 0.0);
  mu[1] = (upper ? 0.5 : -0.5) * spec.separation;
  return mu;
}

void
draw_inlier(const ExperimentSpec& spec,
             Rng& rng,
             std::span<const double> translation,
             double spread,
             std::vector<double>& x)
{
  const bool upper = rng.bernoulli(0.5);
  x = component_mean(spec, upper);
  for (std::size_t d = 0; d < spec.dim; ++d)
    x[d] += spread * rng.normal() + translation[d];
}

void
draw_anomaly(const ExperimentSpec& spec, Rng& rng, std::vector<double>& x)
{
  const bool upper = rng.bernoulli(0.5);
  x = component_mean(spec, upper);
  for (std::size_t d = 0; d < spec.dim; ++d)
    x[d] += spec.anomaly_scale * rng.normal();
  x[spec.dim - 1] += spec.anomaly_offset;
}

std::size_t
validation_rows(const ExperimentSpec& spec)
{
  return static_cast<std::size_t>(
    std::llround(spec.validation_fraction * static_cast<double>(spec.n_train)));
}

// log of the equal-weight mixture density with components
// N(mu_k + translation, spread^2 I).
double
log_mixture_density(const ExperimentSpec& spec,
                    std::span<const double> x,
                    std::span<const double> translation,
                    double spread)
{
  double e[2];
  for (int c = 0; c < 2; ++c) {
    const auto mu = component_mean(spec, c == 1);
    double d2 = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const double r = (x[d] - mu[d] - translation[d]) / spread;
      d2 += r * r;
    }
    e[c] = -0.5 * d2;
  }
  const double hi = std::max(e[0], e[1]);
  const auto dim = static_cast<double>(spec.dim);
  const double log_norm = 0.5 * dim * std::log(2.0 * std::numbers::pi) + dim * std::log(spread);
  return hi + std::log(0.5 * std::exp(e[0] - hi) + 0.5 * std::exp(e[1] - hi)) - log_norm;
}

// ---- trial machinery -----------------------------------------------------

struct PreparedTrial
{
  Problem problem;
  PhaseOneResult phase1;
  std::unique_ptr<Scorer> scorer;
};

PreparedTrial
prepare_trial(const ExperimentSpec& spec, std::size_t seed_index)
{
  PreparedTrial t;
  const auto seed = trial_seed(spec, seed_index);
  t.problem = generate_problem(spec, derive_seed(seed, { stream_problem }));
  t.phase1 = run_phase1(spec, t.problem);
  t.scorer = make_scorer(spec, t.phase1.selected, t.problem.train);
  return t;
}

bool
any_weighted(const std::vector<Method>& methods)
{
  return std::any_of(methods.begin(), methods.end(), is_weighted);
}

TrialArtifacts
compute_artifacts(const ExperimentSpec& spec,
                  const Problem& problem,
                  const Scorer& scorer,
                  std::uint64_t seed,
                  bool need_weights)
{
  TrialArtifacts a;
  a.calib_scores = scorer.score_all(problem.calib);
  a.test_scores = scorer.score_all(problem.test);
  if (!need_weights)
    return a;
  WeightProfile profile;
  if (spec.weights.source == WeightSource::estimated) {
    profile = bagged_weights(problem.calib,
                             problem.test,
                             spec.weights.n_bootstrap,
                             spec.weights.gamma,
                             spec.weights.classifier,
                             derive_seed(seed, { stream_weights }));
  } else {
    for (std::size_t i = 0; i < problem.calib_raw.rows(); ++i)
      profile.calib_weights.push_back(true_weight(spec, problem.calib_raw.row(i)));
    for (std::size_t j = 0; j < problem.test_raw.rows(); ++j)
      profile.test_weights.push_back(true_weight(spec, problem.test_raw.row(j)));
    for (auto* v : { &profile.calib_weights, &profile.test_weights })
      for (double& w : *v)
        w = std::max(w, std::numeric_limits<double>::min());
    const auto [lo_c, hi_c] = std::minmax_element(profile.calib_weights.begin(), profile.calib_weights.end());
    const auto [lo_t, hi_t] = std::minmax_element(profile.test_weights.begin(), profile.test_weights.end());
    profile.clip_lo = std::min(*lo_c, *lo_t);
    profile.clip_hi = std::max(*hi_c, *hi_t);
    profile.seed = derive_seed(seed, { stream_weights });
  }
  a.calib_weights = std::move(profile.calib_weights);
  a.test_weights = std::move(profile.test_weights);
  profile.calib_weights = a.calib_weights;
  profile.test_weights = a.test_weights;
  a.weights_hash = profile.hash();
  return a;
}

PValueVector
method_pvalues(Method method, const TrialArtifacts& a, std::uint64_t u_seed)
{
  const bool weighted = is_weighted(method);
  const auto calib_w = weighted ? a.calib_weights : unit_weights(a.calib_scores.size());
  const auto test_w = weighted ? a.test_weights : unit_weights(a.test_scores.size());
  switch (method) {
    case Method::edf:
    case Method::wedf:
      return discrete_pvalues(a.calib_scores, calib_w, a.test_scores, test_w);
    case Method::edf_rand:
    case Method::wedf_rand:
      return randomized_pvalues(a.calib_scores, calib_w, a.test_scores, test_w, u_seed);
    case Method::kde:
    case Method::wkde:
      return kde_pvalue_batch(fit_weighted_kde_auto(a.calib_scores, calib_w), a.test_scores);
  }
  throw ConfigError("unknown method");
}

DecisionReport
method_decision(Method method,
                std::optional<Pruning> pruning,
                const PValueVector& p,
                double alpha,
                std::uint64_t prune_seed)
{
  if (!is_weighted(method))
    return benjamini_hochberg(p.values, alpha);
  const auto strategy = pruning.value_or(Pruning::deterministic);
  std::optional<std::uint64_t> seed;
  if (strategy != Pruning::deterministic)
    seed = prune_seed;
  return weighted_conformal_selection(p.values, alpha, strategy, seed);
}

std::vector<std::optional<Pruning>>
prunings_for(const ExperimentSpec& spec, Method m)
{
  if (!is_weighted(m))
    return { std::nullopt };
  std::vector<std::optional<Pruning>> out;
  for (auto p : spec.pruning)
    out.emplace_back(p);
  return out;
}

// ---- CSV helpers ---------------------------------------------------------

std::string
pruning_label(const std::optional<Pruning>& p)
{
  return p ? std::string(to_string(*p)) : std::string("none");
}

std::optional<Pruning>
parse_pruning_label(std::string_view s)
{
  if (s == "none")
    return std::nullopt;
  return parse_pruning(s);
}

std::string
optional_real(const std::optional<double>& v)
{
  return v ? csv::format_real(*v) : std::string();
}

template<typename T>
T
parse_unsigned(std::string_view cell, std::size_t row, std::string_view column)
{
  T v{};
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not an unsigned integer");
  return v;
}

const std::vector<std::string> results_columns = {
  "dataset", "seed_index", "seed",    "method",       "pruning", "scorer",
  "fdp",     "power",      "n_rejected", "n_anomalies", "n_eff", "floor_max",
  "min_p",   "weights_hash", "alpha", "n_cal",        "n_test"
};

} // namespace

// ---- enums ---------------------------------------------------------------

std::string_view
to_string(Method m)
{
  switch (m) {
    case Method::edf:
      return "edf";
    case Method::edf_rand:
      return "edf_rand";
    case Method::kde:
      return "kde";
    case Method::wedf:
      return "wedf";
    case Method::wedf_rand:
      return "wedf_rand";
    case Method::wkde:
      return "wkde";
  }
  return "edf";
}

Method
parse_method(std::string_view s)
{
  for (auto m : all_methods())
    if (to_string(m) == s)
      return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

bool
is_weighted(Method m)
{
  return m == Method::wedf || m == Method::wedf_rand || m == Method::wkde;
}

bool
is_randomized(Method m)
{
  return m == Method::edf_rand || m == Method::wedf_rand;
}

const std::vector<Method>&
all_methods()
{
  static const std::vector<Method> methods = { Method::edf,  Method::edf_rand,  Method::kde,
                                               Method::wedf, Method::wedf_rand, Method::wkde };
  return methods;
}

std::vector<double>
ShiftSpec::translation(std::size_t dim) const
{
  std::vector<double> t(dim, 0.0);
  if (kind == ShiftKind::mean_shift) {
    if (delta.size() != dim)
      throw ConfigError("mean_shift delta has " + std::to_string(delta.size()) +
                        " entries for dimension " + std::to_string(dim));
    t = delta;
  }
  return t;
}

double
ShiftSpec::spread() const
{
  return kind == ShiftKind::localization ? 1.0 / (1.0 + strength) : 1.0;
}

// ---- spec ----------------------------------------------------------------

void
ExperimentSpec::validate() const
{
  auto fail = [](const std::string& msg) { throw ConfigError("invalid spec: " + msg); };
  if (name.empty() || name.find_first_of(",\n\r\"") != std::string::npos)
    fail("name must be nonempty and free of commas, quotes and newlines");
  if (dim < 2)
    fail("dim must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    fail("validation_fraction must lie in (0, 1)");
  const std::size_t n_val = validation_rows(*this);
  if (n_val < 2)
    fail("validation split needs at least 2 rows; raise n_train or validation_fraction");
  if (n_val >= n_train || n_train - n_val < std::max<std::size_t>(2, knn_k + 1))
    fail("training split after the validation hold-out must exceed knn_k rows");
  if (n_cal < 2)
    fail("n_cal must be at least 2");
  if (n_test < 1)
    fail("n_test must be at least 1");
  if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5))
    fail("anomaly_rate must lie in (0, 0.5)");
  if (!(separation >= 0.0) || !std::isfinite(separation))
    fail("separation must be nonnegative");
  if (!(anomaly_scale > 0.0) || !std::isfinite(anomaly_scale))
    fail("anomaly_scale must be positive");
  if (!std::isfinite(anomaly_offset))
    fail("anomaly_offset must be finite");
  if (shift.kind == ShiftKind::mean_shift && shift.delta.size() != dim)
    fail("shift.delta must have dim entries");
  for (double d : shift.delta)
    if (!std::isfinite(d))
      fail("shift.delta must be finite");
  if (!(shift.strength >= 0.0) || !std::isfinite(shift.strength))
    fail("shift.strength must be finite and nonnegative");
  if (methods.empty())
    fail("methods must be nonempty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size())
    fail("methods contain duplicates");
  if (any_weighted(methods) && pruning.empty())
    fail("weighted methods need at least one pruning strategy");
  if (std::set<Pruning>(pruning.begin(), pruning.end()).size() != pruning.size())
    fail("pruning contains duplicates");
  if (!(alpha > 0.0 && alpha < 1.0))
    fail("alpha must lie in (0, 1)");
  if (n_seeds < 1)
    fail("n_seeds must be at least 1");
  if (scorers.empty())
    fail("scorers must be nonempty");
  for (const auto& s : scorers)
    if (s != "knn" && s != "histogram" && s != "mahalanobis")
      fail("unknown scorer '" + s + "'");
  if (knn_k < 1)
    fail("knn_k must be positive");
  if (histogram_bins < 2)
    fail("histogram_bins must be at least 2");
  if (!(mahalanobis_ridge >= 0.0))
    fail("mahalanobis_ridge must be nonnegative");
  if (weights.n_bootstrap < 1)
    fail("weights.n_bootstrap must be at least 1");
  if (!(weights.gamma >= 0.0 && weights.gamma < 0.5))
    fail("weights.gamma must lie in [0, 0.5)");
}

ExperimentSpec
parse_spec(const json& j)
{
  reject_unknown_keys(j,
                      { "name",          "n_train",        "n_cal",     "n_test",  "dim",
                        "anomaly_rate",  "separation",     "anomaly_scale",      "anomaly_offset",
                        "shift",         "methods",        "pruning",   "alpha",   "n_seeds",
                        "master_seed",   "validation_fraction", "scorers", "knn_k",
                        "histogram_bins", "mahalanobis_ridge", "weights" },
                      "");
  ExperimentSpec s;
  read_key(j, "name", s.name, "");
  read_key(j, "n_train", s.n_train, "");
  read_key(j, "n_cal", s.n_cal, "");
  read_key(j, "n_test", s.n_test, "");
  read_key(j, "dim", s.dim, "");
  read_key(j, "anomaly_rate", s.anomaly_rate, "");
  read_key(j, "separation", s.separation, "");
  read_key(j, "anomaly_scale", s.anomaly_scale, "");
  read_key(j, "anomaly_offset", s.anomaly_offset, "");
  if (j.contains("shift"))
    s.shift = parse_shift(j.at("shift"));
  if (j.contains("methods")) {
    std::vector<std::string> names;
    read_key(j, "methods", names, "");
    s.methods.clear();
    for (const auto& n : names)
      s.methods.push_back(parse_method(n));
  }
  if (j.contains("pruning")) {
    std::vector<std::string> names;
    read_key(j, "pruning", names, "");
    s.pruning.clear();
    for (const auto& n : names)
      s.pruning.push_back(parse_pruning(n));
  }
  read_key(j, "alpha", s.alpha, "");
  read_key(j, "n_seeds", s.n_seeds, "");
  read_key(j, "master_seed", s.master_seed, "");
  read_key(j, "validation_fraction", s.validation_fraction, "");
  read_key(j, "scorers", s.scorers, "");
  read_key(j, "knn_k", s.knn_k, "");
  read_key(j, "histogram_bins", s.histogram_bins, "");
  read_key(j, "mahalanobis_ridge", s.mahalanobis_ridge, "");
  if (j.contains("weights"))
    s.weights = parse_weights(j.at("weights"));
  s.validate();
  return s;
}

ExperimentSpec
read_spec(const std::filesystem::path& path)
{
  return parse_spec(io::read_json(path));
}

json
spec_to_json(const ExperimentSpec& s)
{
  json j;
  j["name"] = s.name;
  j["n_train"] = s.n_train;
  j["n_cal"] = s.n_cal;
  j["n_test"] = s.n_test;
  j["dim"] = s.dim;
  j["anomaly_rate"] = s.anomaly_rate;
  j["separation"] = s.separation;
  j["anomaly_scale"] = s.anomaly_scale;
  j["anomaly_offset"] = s.anomaly_offset;
  json shift;
  switch (s.shift.kind) {
    case ShiftKind::none:
      shift["type"] = "none";
      break;
    case ShiftKind::mean_shift:
      shift["type"] = "mean_shift";
      shift["delta"] = s.shift.delta;
      break;
    case ShiftKind::localization:
      shift["type"] = "localization";
      shift["strength"] = s.shift.strength;
      break;
  }
  j["shift"] = shift;
  json methods = json::array();
  for (auto m : s.methods)
    methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  json pruning = json::array();
  for (auto p : s.pruning)
    pruning.push_back(std::string(to_string(p)));
  j["pruning"] = pruning;
  j["alpha"] = s.alpha;
  j["n_seeds"] = s.n_seeds;
  j["master_seed"] = s.master_seed;
  j["validation_fraction"] = s.validation_fraction;
  j["scorers"] = s.scorers;
  j["knn_k"] = s.knn_k;
  j["histogram_bins"] = s.histogram_bins;
  j["mahalanobis_ridge"] = s.mahalanobis_ridge;
  json w;
  w["source"] = s.weights.source == WeightSource::estimated ? "estimated" : "oracle";
  w["classifier"] = std::string(to_string(s.weights.classifier));
  w["n_bootstrap"] = s.weights.n_bootstrap;
  w["gamma"] = s.weights.gamma;
  j["weights"] = w;
  return j;
}

std::uint64_t
trial_seed(const ExperimentSpec& spec, std::size_t seed_index)
{
  return derive_seed(spec.master_seed, { static_cast<std::uint64_t>(seed_index) });
}

// ---- generator -----------------------------------------------------------

Problem
generate_problem(const ExperimentSpec& spec, std::uint64_t seed)
{
  spec.validate();
  const std::size_t n_val = validation_rows(spec);
  const std::size_t n_fit = spec.n_train - n_val;
  const std::vector<double> no_shift(spec.dim, 0.0);
  const auto translation = spec.shift.translation(spec.dim);
  const double spread = spec.shift.spread();
  std::vector<double> x;

  Problem p;
  p.train_raw = FeatureMatrix(0, spec.dim);
  p.val_raw = FeatureMatrix(0, spec.dim);
  p.calib_raw = FeatureMatrix(0, spec.dim);
  p.test_raw = FeatureMatrix(0, spec.dim);

  Rng train_rng(derive_seed(seed, { split_train }));
  for (std::size_t i = 0; i < n_fit; ++i) {
    draw_inlier(spec, train_rng, no_shift, 1.0, x);
    p.train_raw.append_row(x);
  }

  Rng val_rng(derive_seed(seed, { split_val }));
  p.val_labels.resize(n_val);
  for (auto& l : p.val_labels)
    l = val_rng.bernoulli(spec.anomaly_rate) ? Label::anomaly : Label::inlier;
  if (std::find(p.val_labels.begin(), p.val_labels.end(), Label::anomaly) == p.val_labels.end())
    p.val_labels.front() = Label::anomaly;
  if (std::find(p.val_labels.begin(), p.val_labels.end(), Label::inlier) == p.val_labels.end())
    p.val_labels.back() = Label::inlier;
  for (auto l : p.val_labels) {
    if (l == Label::anomaly)
      draw_anomaly(spec, val_rng, x);
    else
      draw_inlier(spec, val_rng, no_shift, 1.0, x);
    p.val_raw.append_row(x);
  }

  Rng calib_rng(derive_seed(seed, { split_calib }));
  for (std::size_t i = 0; i < spec.n_cal; ++i) {
    draw_inlier(spec, calib_rng, no_shift, 1.0, x);
    p.calib_raw.append_row(x);
  }

  Rng test_rng(derive_seed(seed, { split_test }));
  p.test_labels.resize(spec.n_test);
  for (auto& l : p.test_labels) {
    l = test_rng.bernoulli(spec.anomaly_rate) ? Label::anomaly : Label::inlier;
    if (l == Label::anomaly)
      draw_anomaly(spec, test_rng, x);
    else
      draw_inlier(spec, test_rng, translation, spread, x);
    p.test_raw.append_row(x);
  }

  const auto z = Standardizer::fit(p.train_raw);
  p.train = z.apply(p.train_raw);
  p.val = z.apply(p.val_raw);
  p.calib = z.apply(p.calib_raw);
  p.test = z.apply(p.test_raw);
  return p;
}

double
inlier_density(const ExperimentSpec& spec, std::span<const double> x)
{
  if (x.size() != spec.dim)
    throw ConfigError("point has the wrong dimension");
  const std::vector<double> no_shift(spec.dim, 0.0);
  return std::exp(log_mixture_density(spec, x, no_shift, 1.0));
}

double
true_weight(const ExperimentSpec& spec, std::span<const double> x)
{
  if (x.size() != spec.dim)
    throw ConfigError("point has the wrong dimension");
  const std::vector<double> no_shift(spec.dim, 0.0);
  const auto t = spec.shift.translation(spec.dim);
  return std::exp(log_mixture_density(spec, x, t, spec.shift.spread()) -
                  log_mixture_density(spec, x, no_shift, 1.0));
}

std::unique_ptr<Scorer>
make_scorer(const ExperimentSpec& spec, std::string_view name, const FeatureMatrix& train)
{
  if (name == "knn")
    return std::make_unique<KnnScorer>(fit_knn_scorer(train, spec.knn_k));
  if (name == "histogram")
    return std::make_unique<HistogramScorer>(fit_histogram_scorer(train, spec.histogram_bins));
  if (name == "mahalanobis")
    return std::make_unique<MahalanobisScorer>(fit_mahalanobis_scorer(train, spec.mahalanobis_ridge));
  throw ConfigError("unknown scorer '" + std::string(name) + "'");
}

// ---- phases --------------------------------------------------------------

PhaseOneResult
run_phase1(const ExperimentSpec& spec, const Problem& problem)
{
  PhaseOneResult r;
  const bool both_classes =
    std::count(problem.val_labels.begin(), problem.val_labels.end(), Label::anomaly) > 0 &&
    std::count(problem.val_labels.begin(), problem.val_labels.end(), Label::inlier) > 0;
  if (both_classes) {
    for (const auto& name : spec.scorers) {
      try {
        const auto scorer = make_scorer(spec, name, problem.train);
        const auto scores = scorer->score_all(problem.val);
        r.candidates.push_back({ name, classification_metrics(scores, problem.val_labels) });
      } catch (const NumericalError&) {
        // an unfit candidate simply drops out of the ranking
      }
    }
  }
  if (r.candidates.empty()) {
    r.fallback = true;
    r.selected = spec.scorers.front();
  } else {
    r.selected = r.candidates[lexicographic_select(r.candidates)].name;
  }
  return r;
}

PhaseOneResult
run_phase1(const ExperimentSpec& spec, std::size_t seed_index)
{
  const auto seed = trial_seed(spec, seed_index);
  return run_phase1(spec, generate_problem(spec, derive_seed(seed, { stream_problem })));
}

std::vector<TrialResult>
run_phase2(const ExperimentSpec& spec,
           const Problem& problem,
           const Scorer& scorer,
           std::size_t seed_index,
           TrialArtifacts* artifacts)
{
  const auto seed = trial_seed(spec, seed_index);
  const auto a = compute_artifacts(spec, problem, scorer, seed, any_weighted(spec.methods));

  std::vector<TrialResult> out;
  for (auto method : all_methods()) {
    if (std::find(spec.methods.begin(), spec.methods.end(), method) == spec.methods.end())
      continue;
    const bool weighted = is_weighted(method);
    const auto p = method_pvalues(method, a, derive_seed(seed, { stream_pvalues, method_id(method) }));

    double n_eff = static_cast<double>(a.calib_scores.size());
    double floor_max = 0.0;
    if (weighted)
      n_eff = effective_sample_size(a.calib_weights);
    if (method != Method::kde && method != Method::wkde) {
      double calib_total = weighted ? 0.0 : static_cast<double>(a.calib_scores.size());
      if (weighted)
        for (double w : a.calib_weights)
          calib_total += w;
      for (std::size_t j = 0; j < a.test_scores.size(); ++j) {
        const double wj = weighted ? a.test_weights[j] : 1.0;
        floor_max = std::max(floor_max, wj / (calib_total + wj));
      }
    }
    const double min_p = p.values.empty() ? 1.0 : *std::min_element(p.values.begin(), p.values.end());

    for (const auto& pruning : prunings_for(spec, method)) {
      const auto prune_seed =
        derive_seed(seed, { stream_pruning, method_id(method), pruning ? pruning_id(*pruning) : 0 });
      const auto report = method_decision(method, pruning, p, spec.alpha, prune_seed);
      const auto m = trial_metrics(report.rejected, problem.test_labels);
      TrialResult r;
      r.dataset = spec.name;
      r.seed_index = seed_index;
      r.seed = seed;
      r.method = method;
      r.pruning = pruning;
      r.scorer = scorer.name();
      r.fdp = m.fdp;
      r.power = m.power;
      r.n_rejected = m.n_rejected;
      r.n_anomalies = m.n_anomalies;
      r.n_eff = n_eff;
      r.floor_max = floor_max;
      r.min_p = min_p;
      r.weights_hash = weighted ? a.weights_hash : 0;
      r.alpha = spec.alpha;
      r.n_cal = spec.n_cal;
      r.n_test = spec.n_test;
      out.push_back(std::move(r));
    }
  }
  if (artifacts)
    *artifacts = a;
  return out;
}

std::vector<TrialResult>
run_trial(const ExperimentSpec& spec, std::size_t seed_index)
{
  const auto t = prepare_trial(spec, seed_index);
  return run_phase2(spec, t.problem, *t.scorer, seed_index);
}

std::vector<std::size_t>
redraw_rejection_counts(const ExperimentSpec& spec,
                        std::size_t seed_index,
                        Method method,
                        Pruning pruning,
                        std::size_t n_draws)
{
  const auto t = prepare_trial(spec, seed_index);
  const auto seed = trial_seed(spec, seed_index);
  const auto a = compute_artifacts(spec, t.problem, *t.scorer, seed, is_weighted(method));
  std::optional<Pruning> prune;
  if (is_weighted(method))
    prune = pruning;

  std::vector<std::size_t> counts(n_draws);
  // Deterministic methods are evaluated once per draw as well, so the
  // returned spread is measured rather than assumed.
  for (std::size_t d = 0; d < n_draws; ++d) {
    const auto p = method_pvalues(method, a, derive_seed(seed, { stream_redraw, method_id(method), d }));
    const auto prune_seed = derive_seed(seed, { stream_redraw, method_id(method), d, pruning_id(pruning) });
    counts[d] = method_decision(method, prune, p, spec.alpha, prune_seed).rejected.size();
  }
  return counts;
}

// ---- aggregation ---------------------------------------------------------

std::vector<SummaryRow>
summarize(const std::vector<TrialResult>& rows)
{
  std::vector<std::string> datasets;
  for (const auto& r : rows)
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end())
      datasets.push_back(r.dataset);

  using Key = std::tuple<std::size_t, Method, int>;
  std::map<Key, std::vector<const TrialResult*>> groups;
  for (const auto& r : rows) {
    const auto ds = static_cast<std::size_t>(
      std::find(datasets.begin(), datasets.end(), r.dataset) - datasets.begin());
    const int pr = r.pruning ? static_cast<int>(*r.pruning) : -1;
    groups[{ ds, r.method, pr }].push_back(&r);
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    const auto& first = *members.front();
    SummaryRow s;
    s.dataset = first.dataset;
    s.method = first.method;
    s.pruning = first.pruning;
    s.n_train = first.n_cal;
    s.n_test = first.n_test;
    s.alpha = first.alpha;
    s.n_trials = members.size();
    std::vector<double> fdps, powers;
    double n_eff = 0.0, rejected = 0.0;
    for (const auto* r : members) {
      fdps.push_back(r->fdp);
      if (r->power)
        powers.push_back(*r->power);
      n_eff += r->n_eff;
      rejected += static_cast<double>(r->n_rejected);
    }
    const auto v = validity_lenient(fdps, s.alpha);
    s.fdr_mean = v.mean_fdp;
    s.fdr_sd = v.sd_fdp;
    s.fdr_bound = v.bound;
    s.valid = v.valid;
    s.valid_raw = v.valid_raw;
    s.n_power = powers.size();
    if (!powers.empty()) {
      const auto ps = mean_sd(powers);
      s.power_mean = ps.mean;
      s.power_sd = ps.sd;
    }
    s.mean_n_eff = n_eff / static_cast<double>(members.size());
    s.mean_rejected = rejected / static_cast<double>(members.size());
    out.push_back(std::move(s));
  }
  return out;
}

ExperimentResult
run_experiment(const ExperimentSpec& spec)
{
  spec.validate();
  std::vector<std::vector<TrialResult>> per_seed(spec.n_seeds);
  parallel_for(spec.n_seeds, [&](std::size_t i) { per_seed[i] = run_trial(spec, i); });
  ExperimentResult result;
  result.spec = spec;
  for (auto& rows : per_seed)
    for (auto& r : rows)
      result.rows.push_back(std::move(r));
  result.summary = summarize(result.rows);
  return result;
}

// ---- emission ------------------------------------------------------------

std::string
results_to_csv(const std::vector<TrialResult>& rows)
{
  std::ostringstream out;
  for (std::size_t c = 0; c < results_columns.size(); ++c)
    out << (c ? "," : "") << results_columns[c];
  out << '\n';
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.seed_index << ',' << r.seed << ',' << to_string(r.method) << ','
        << pruning_label(r.pruning) << ',' << r.scorer << ',' << csv::format_real(r.fdp) << ','
        << optional_real(r.power) << ',' << r.n_rejected << ',' << r.n_anomalies << ','
        << csv::format_real(r.n_eff) << ',' << csv::format_real(r.floor_max) << ','
        << csv::format_real(r.min_p) << ',' << r.weights_hash << ',' << csv::format_real(r.alpha)
        << ',' << r.n_cal << ',' << r.n_test << '\n';
  }
  return out.str();
}

std::vector<TrialResult>
parse_results_csv(std::string_view text)
{
  const auto table = csv::parse_table(text);
  std::vector<std::size_t> col(results_columns.size());
  for (std::size_t c = 0; c < results_columns.size(); ++c) {
    const auto idx = table.column(results_columns[c]);
    if (!idx)
      throw ParseError("results file has no '" + results_columns[c] + "' column");
    col[c] = *idx;
  }
  std::vector<TrialResult> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cells = table.rows[i];
    const std::size_t row = i + 1;
    auto cell = [&](std::size_t c) -> const std::string& { return cells[col[c]]; };
    TrialResult r;
    try {
      r.dataset = cell(0);
      r.seed_index = parse_unsigned<std::size_t>(cell(1), row, "seed_index");
      r.seed = parse_unsigned<std::uint64_t>(cell(2), row, "seed");
      r.method = parse_method(cell(3));
      r.pruning = parse_pruning_label(cell(4));
      r.scorer = cell(5);
      r.fdp = csv::parse_real(cell(6), row, "fdp");
      if (!cell(7).empty())
        r.power = csv::parse_real(cell(7), row, "power");
      r.n_rejected = parse_unsigned<std::size_t>(cell(8), row, "n_rejected");
      r.n_anomalies = parse_unsigned<std::size_t>(cell(9), row, "n_anomalies");
      r.n_eff = csv::parse_real(cell(10), row, "n_eff");
      r.floor_max = csv::parse_real(cell(11), row, "floor_max");
      r.min_p = csv::parse_real(cell(12), row, "min_p");
      r.weights_hash = parse_unsigned<std::uint64_t>(cell(13), row, "weights_hash");
      r.alpha = csv::parse_real(cell(14), row, "alpha");
      r.n_cal = parse_unsigned<std::size_t>(cell(15), row, "n_cal");
      r.n_test = parse_unsigned<std::size_t>(cell(16), row, "n_test");
    } catch (const ConfigError& e) {
      throw ParseError("row " + std::to_string(row) + ": " + e.what());
    }
    if (r.fdp < 0.0 || r.fdp > 1.0 || (r.power && (*r.power < 0.0 || *r.power > 1.0)))
      throw ParseError("row " + std::to_string(row) + ": fdp and power must lie in [0, 1]");
    if (is_weighted(r.method) != r.pruning.has_value())
      throw ParseError("row " + std::to_string(row) + ": pruning does not match the method");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string
summary_to_csv(const std::vector<SummaryRow>& rows)
{
  std::ostringstream out;
  out << "dataset,method,pruning,fdr_mean,fdr_sd,power_mean,power_sd,n_train,n_test,valid,"
         "valid_raw,fdr_bound,n_trials,n_power,mean_n_eff,mean_rejected\n";
  for (const auto& s : rows) {
    out << s.dataset << ',' << to_string(s.method) << ',' << pruning_label(s.pruning) << ','
        << csv::format_real(s.fdr_mean) << ',' << csv::format_real(s.fdr_sd) << ','
        << optional_real(s.power_mean) << ',' << csv::format_real(s.power_sd) << ',' << s.n_train
        << ',' << s.n_test << ',' << (s.valid ? "true" : "false") << ','
        << (s.valid_raw ? "true" : "false") << ',' << csv::format_real(s.fdr_bound) << ','
        << s.n_trials << ',' << s.n_power << ',' << csv::format_real(s.mean_n_eff) << ','
        << csv::format_real(s.mean_rejected) << '\n';
  }
  return out.str();
}

json
summary_to_json(const std::vector<SummaryRow>& rows)
{
  json arr = json::array();
  for (const auto& s : rows) {
    json j;
    j["dataset"] = s.dataset;
    j["method"] = std::string(to_string(s.method));
    j["pruning"] = pruning_label(s.pruning);
    j["fdr_mean"] = s.fdr_mean;
    j["fdr_sd"] = s.fdr_sd;
    j["power_mean"] = s.power_mean ? json(*s.power_mean) : json(nullptr);
    j["power_sd"] = s.power_sd;
    j["n_train"] = s.n_train;
    j["n_test"] = s.n_test;
    j["valid"] = s.valid;
    j["valid_raw"] = s.valid_raw;
    j["fdr_bound"] = s.fdr_bound;
    j["alpha"] = s.alpha;
    j["n_trials"] = s.n_trials;
    j["n_power"] = s.n_power;
    j["mean_n_eff"] = s.mean_n_eff;
    j["mean_rejected"] = s.mean_rejected;
    j["wcs_approx"] = s.pruning.has_value();
    arr.push_back(std::move(j));
  }
  return arr;
}

void
write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir)
{
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  csv::write_text(out_dir / "results.csv", results_to_csv(result.rows));
  csv::write_text(out_dir / "summary.csv", summary_to_csv(result.summary));
  json j;
  j["spec"] = spec_to_json(result.spec);
  j["summary"] = summary_to_json(result.summary);
  io::write_json(out_dir / "summary.json", j);
}

} // namespace confshift::sim

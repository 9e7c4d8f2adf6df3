#include "cli.hpp"

#include "confshift/conformal_pvalues.hpp"
#include "confshift/csv.hpp"
#include "confshift/errors.hpp"
#include "confshift/feature_matrix.hpp"
#include "confshift/io.hpp"
#include "confshift/kde_pvalues.hpp"
#include "confshift/multiple_testing.hpp"
#include "confshift/scoring.hpp"
#include "confshift/shift_weights.hpp"
#include "confshift/simharness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace confshift::cli {

namespace {

std::string
read_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct WeightsArgs
{
  std::string calib, test, out, classifier = "forest";
  std::size_t bootstrap = 10;
  double gamma = 0.05;
  std::uint64_t seed = 0;
};

struct PValuesArgs
{
  std::string scores, calib_scores, weights, method, out;
  std::optional<std::uint64_t> seed;
};

struct SelectArgs
{
  std::string pvalues, procedure = "bh", pruning = "det", out;
  double alpha = 0.0;
  std::optional<std::uint64_t> seed;
};

struct SimulateArgs
{
  std::string spec, out_dir;
};

struct ReportArgs
{
  std::string in, out;
};

void
cmd_weights(const WeightsArgs& a, std::ostream& out)
{
  const auto calib = read_feature_csv(a.calib);
  const auto test = read_feature_csv(a.test);
  const auto kind = parse_classifier_kind(a.classifier);
  const auto profile = bagged_weights(calib, test, a.bootstrap, a.gamma, kind, a.seed);
  io::write_json(a.out, io::to_json(profile));
  out << "n_eff=" << csv::format_real(effective_sample_size(profile.calib_weights)) << '\n';
  out << "clip_lo=" << csv::format_real(profile.clip_lo)
      << " clip_hi=" << csv::format_real(profile.clip_hi) << '\n';
}

void
cmd_pvalues(const PValuesArgs& a, std::ostream& out)
{
  const auto method = parse_pvalue_method(a.method);
  if (method == PValueMethod::randomized && !a.seed)
    throw ConfigError("--method randomized requires --seed");

  ScoreBatch batch = ingest_scores(a.scores);
  if (!a.calib_scores.empty()) {
    if (!batch.calib_scores.empty())
      throw ConfigError("--scores already has calibration rows; drop --calib-scores or the split column");
    const auto calib = ingest_scores(a.calib_scores);
    batch.calib_scores = calib.test_scores;
  }
  if (batch.calib_scores.empty())
    throw ConfigError("no calibration scores: add a split column or pass --calib-scores");

  std::vector<double> calib_w = unit_weights(batch.calib_scores.size());
  std::vector<double> test_w = unit_weights(batch.test_scores.size());
  if (!a.weights.empty()) {
    const auto profile = io::weight_profile_from_json(io::read_json(a.weights));
    if (profile.calib_weights.size() != calib_w.size() || profile.test_weights.size() != test_w.size())
      throw ConfigError("weight profile sizes (" + std::to_string(profile.calib_weights.size()) + ", " +
                        std::to_string(profile.test_weights.size()) + ") do not match the scores (" +
                        std::to_string(calib_w.size()) + ", " + std::to_string(test_w.size()) + ")");
    calib_w = profile.calib_weights;
    test_w = profile.test_weights;
  }

  PValueVector p;
  switch (method) {
    case PValueMethod::discrete:
      p = discrete_pvalues(batch.calib_scores, calib_w, batch.test_scores, test_w);
      break;
    case PValueMethod::randomized:
      p = randomized_pvalues(batch.calib_scores, calib_w, batch.test_scores, test_w, *a.seed);
      break;
    case PValueMethod::kde: {
      const auto kde = fit_weighted_kde_auto(batch.calib_scores, calib_w);
      p = kde_pvalue_batch(kde, batch.test_scores);
      const std::string model_path = a.out + ".kde.json";
      io::write_json(model_path, io::to_json(kde));
      out << "bandwidth=" << csv::format_real(kde.bandwidth)
          << " degenerate_flag=" << (kde.degenerate ? "true" : "false") << '\n';
      out << "model=" << model_path << '\n';
      break;
    }
  }
  csv::write_text(a.out, io::pvalues_to_csv(p));
  out << "p_values=" << p.size() << '\n';
}

void
cmd_select(const SelectArgs& a, std::ostream& out)
{
  const auto p = io::parse_pvalues_csv(read_file(a.pvalues));
  DecisionReport report;
  if (a.procedure == "bh") {
    report = benjamini_hochberg(p.values, a.alpha);
  } else if (a.procedure == "wcs") {
    const auto strategy = parse_pruning(a.pruning);
    if (strategy != Pruning::deterministic && !a.seed)
      throw ConfigError("--pruning " + a.pruning + " requires --seed");
    report = weighted_conformal_selection(p.values, a.alpha, strategy, a.seed);
  } else {
    throw ConfigError("unknown procedure '" + a.procedure + "'");
  }
  io::write_json(a.out, io::to_json(report));
  out << "rejected=" << report.rejected.size() << '\n';
}

void
cmd_simulate(const SimulateArgs& a, std::ostream& out)
{
  const auto spec = sim::read_spec(a.spec);
  const auto result = sim::run_experiment(spec);
  sim::write_experiment(result, a.out_dir);
  out << "trials=" << spec.n_seeds << " rows=" << result.rows.size() << '\n';
  out << sim::summary_to_csv(result.summary);
}

void
cmd_report(const ReportArgs& a, std::ostream& out)
{
  const auto rows = sim::parse_results_csv(read_file(a.in));
  if (rows.empty())
    throw ConfigError(a.in + " contains no result rows");
  const auto summary = sim::summarize(rows);
  const auto text = sim::summary_to_csv(summary);
  csv::write_text(a.out, text);
  out << text;
}

// CLI11 validator: open interval (0, 1).
const CLI::Validator open_unit{
  [](std::string& s) -> std::string {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(s, &used);
      if (used != s.size())
        return "not a number: " + s;
    } catch (const std::exception&) {
      return "not a number: " + s;
    }
    if (!(v > 0.0 && v < 1.0))
      return "must lie strictly between 0 and 1";
    return {};
  },
  "(0,1)"
};

} // namespace

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Conformal anomaly discoveries under covariate shift", "confshift" };
  app.require_subcommand(1);

  WeightsArgs wa;
  auto* weights = app.add_subcommand("weights", "Estimate bagged density-ratio weights");
  weights->add_option("--calib", wa.calib, "Calibration feature CSV")->required();
  weights->add_option("--test", wa.test, "Test feature CSV")->required();
  weights->add_option("--bootstrap", wa.bootstrap, "Bootstrap replicas B")->check(CLI::PositiveNumber);
  weights->add_option("--gamma", wa.gamma, "Winsorization level in [0, 0.5)");
  weights->add_option("--classifier", wa.classifier, "logistic or forest")
    ->check(CLI::IsMember({ "logistic", "forest" }));
  weights->add_option("--seed", wa.seed, "Master seed")->required();
  weights->add_option("--out", wa.out, "Output weight profile JSON")->required();

  PValuesArgs pa;
  auto* pvalues = app.add_subcommand("pvalues", "Compute conformal p-values");
  pvalues->add_option("--scores", pa.scores, "Score CSV (score[,label][,split])")->required();
  pvalues->add_option("--calib-scores", pa.calib_scores, "Calibration score CSV when --scores has no split column");
  pvalues->add_option("--weights", pa.weights, "Weight profile JSON (unit weights if omitted)");
  pvalues->add_option("--method", pa.method, "discrete, randomized or kde")
    ->required()
    ->check(CLI::IsMember({ "discrete", "randomized", "kde" }));
  pvalues->add_option("--seed", pa.seed, "Seed for the auxiliary uniforms (randomized)");
  pvalues->add_option("--out", pa.out, "Output p-value CSV")->required();

  SelectArgs sa;
  auto* select = app.add_subcommand("select", "Apply BH or WCS to p-values");
  select->add_option("--pvalues", sa.pvalues, "P-value CSV")->required();
  select->add_option("--alpha", sa.alpha, "Target FDR level in (0, 1)")->required()->check(open_unit);
  select->add_option("--procedure", sa.procedure, "bh or wcs")->check(CLI::IsMember({ "bh", "wcs" }));
  select->add_option("--pruning", sa.pruning, "WCS pruning: det, hom or het")
    ->check(CLI::IsMember({ "det", "hom", "het", "deterministic", "homogeneous", "heterogeneous" }));
  select->add_option("--seed", sa.seed, "Seed for randomized pruning");
  select->add_option("--out", sa.out, "Output decision report JSON")->required();

  SimulateArgs ma;
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic experiment spec");
  simulate->add_option("--spec", ma.spec, "Experiment spec JSON")->required();
  simulate->add_option("--out-dir", ma.out_dir, "Directory for results.csv, summary.csv, summary.json")->required();

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Summarize a results.csv");
  report->add_option("--in", ra.in, "results.csv from simulate")->required();
  report->add_option("--out", ra.out, "Output summary CSV")->required();

  // CLI11 consumes arguments from the back
  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());

  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return exit_invalid;
  }

  try {
    if (weights->parsed())
      cmd_weights(wa, out);
    else if (pvalues->parsed())
      cmd_pvalues(pa, out);
    else if (select->parsed())
      cmd_select(sa, out);
    else if (simulate->parsed())
      cmd_simulate(ma, out);
    else if (report->parsed())
      cmd_report(ra, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return exit_io;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_io;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }
  return exit_ok;
}

} // namespace confshift::cli

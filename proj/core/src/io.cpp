#include "confshift/io.hpp"

#include "confshift/csv.hpp"
#include "confshift/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace confshift::io {

namespace {

template<typename T>
T
field(const json& j, const char* key)
{
  if (!j.is_object() || !j.contains(key))
    throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

std::uint64_t
parse_u64(std::string_view cell, std::size_t row, std::string_view column)
{
  std::uint64_t v = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not an unsigned integer");
  return v;
}

} // namespace

json
to_json(const WeightProfile& w)
{
  json j;
  j["calib_weights"] = w.calib_weights;
  j["test_weights"] = w.test_weights;
  j["clip_lo"] = w.clip_lo;
  j["clip_hi"] = w.clip_hi;
  j["gamma"] = w.gamma;
  j["n_bootstrap"] = w.n_bootstrap;
  j["seed"] = w.seed;
  j["classifier"] = std::string(to_string(w.classifier));
  return j;
}

WeightProfile
weight_profile_from_json(const json& j)
{
  WeightProfile w;
  w.calib_weights = field<std::vector<double>>(j, "calib_weights");
  w.test_weights = field<std::vector<double>>(j, "test_weights");
  w.clip_lo = field<double>(j, "clip_lo");
  w.clip_hi = field<double>(j, "clip_hi");
  w.gamma = field<double>(j, "gamma");
  w.n_bootstrap = field<std::size_t>(j, "n_bootstrap");
  w.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("classifier"))
    w.classifier = parse_classifier_kind(field<std::string>(j, "classifier"));
  for (double v : w.calib_weights)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ParseError("calib_weights must be positive and finite");
  for (double v : w.test_weights)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ParseError("test_weights must be positive and finite");
  return w;
}

json
to_json(const PValueVector& p)
{
  json j;
  j["method"] = std::string(to_string(p.method));
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
  j["p_values"] = p.values;
  return j;
}

PValueVector
pvalues_from_json(const json& j)
{
  PValueVector p;
  p.method = parse_pvalue_method(field<std::string>(j, "method"));
  if (j.contains("seed") && !j.at("seed").is_null())
    p.seed = field<std::uint64_t>(j, "seed");
  p.values = field<std::vector<double>>(j, "p_values");
  return p;
}

std::string
pvalues_to_csv(const PValueVector& p)
{
  std::ostringstream out;
  out << "index,p_value,method,seed\n";
  const auto method = to_string(p.method);
  const std::string seed = p.seed ? std::to_string(*p.seed) : std::string();
  for (std::size_t j = 0; j < p.values.size(); ++j)
    out << j << ',' << csv::format_real(p.values[j]) << ',' << method << ',' << seed << '\n';
  return out.str();
}

PValueVector
parse_pvalues_csv(std::string_view text)
{
  const auto table = csv::parse_table(text);
  const auto col_p = table.column("p_value");
  if (!col_p)
    throw ParseError("p-value file has no 'p_value' column");
  const auto col_method = table.column("method");
  const auto col_seed = table.column("seed");
  const auto col_index = table.column("index");

  PValueVector p;
  p.values.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    if (col_index) {
      const auto idx = parse_u64(row[*col_index], row_no, "index");
      if (idx != r)
        throw ParseError("row " + std::to_string(row_no) + ": index out of sequence");
    }
    const double v = csv::parse_real(row[*col_p], row_no, "p_value");
    if (v < 0.0 || v > 1.0)
      throw ParseError("row " + std::to_string(row_no) + ": p_value outside [0, 1]");
    p.values.push_back(v);
    if (col_method) {
      const auto m = parse_pvalue_method(row[*col_method]);
      if (r == 0)
        p.method = m;
      else if (m != p.method)
        throw ParseError("row " + std::to_string(row_no) + ": mixed p-value methods");
    }
    if (col_seed && !row[*col_seed].empty() && r == 0)
      p.seed = parse_u64(row[*col_seed], row_no, "seed");
  }
  return p;
}

json
to_json(const WeightedKde& kde)
{
  json j;
  j["kernel"] = "gaussian";
  j["bandwidth"] = kde.bandwidth;
  j["degenerate_flag"] = kde.degenerate;
  j["support_scores"] = kde.support_scores;
  j["norm_weights"] = kde.norm_weights;
  return j;
}

WeightedKde
kde_from_json(const json& j)
{
  if (field<std::string>(j, "kernel") != "gaussian")
    throw ParseError("only the gaussian kernel is supported");
  WeightedKde kde;
  kde.bandwidth = field<double>(j, "bandwidth");
  kde.degenerate = field<bool>(j, "degenerate_flag");
  kde.support_scores = field<std::vector<double>>(j, "support_scores");
  kde.norm_weights = field<std::vector<double>>(j, "norm_weights");
  if (kde.support_scores.size() != kde.norm_weights.size())
    throw ParseError("support_scores and norm_weights differ in length");
  if (!(kde.bandwidth > 0.0))
    throw ParseError("bandwidth must be positive");
  return kde;
}

json
to_json(const DecisionReport& r)
{
  json j;
  j["procedure"] = std::string(to_string(r.procedure));
  j["alpha"] = r.alpha;
  j["threshold"] = r.threshold;
  j["m"] = r.m;
  j["n_rejected"] = r.rejected.size();
  j["prune_seed"] = r.prune_seed ? json(*r.prune_seed) : json(nullptr);
  j["wcs_approx"] = r.wcs_approx;
  j["rejected"] = r.rejected;
  return j;
}

DecisionReport
decision_report_from_json(const json& j)
{
  DecisionReport r;
  r.procedure = parse_procedure(field<std::string>(j, "procedure"));
  r.alpha = field<double>(j, "alpha");
  r.threshold = field<double>(j, "threshold");
  r.m = field<std::size_t>(j, "m");
  if (j.contains("prune_seed") && !j.at("prune_seed").is_null())
    r.prune_seed = field<std::uint64_t>(j, "prune_seed");
  if (j.contains("wcs_approx"))
    r.wcs_approx = field<bool>(j, "wcs_approx");
  r.rejected = field<std::vector<std::size_t>>(j, "rejected");
  return r;
}

json
read_json(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void
write_json(const std::filesystem::path& path, const json& j)
{
  csv::write_text(path, j.dump(2) + "\n");
}

} // namespace confshift::io

#pragma once

#include "confshift/kde_pvalues.hpp"
#include "confshift/multiple_testing.hpp"
#include "confshift/shift_weights.hpp"
#include "confshift/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace confshift::io {

using json = nlohmann::ordered_json;

json to_json(const WeightProfile& w);
WeightProfile weight_profile_from_json(const json& j);

json to_json(const PValueVector& p);
PValueVector pvalues_from_json(const json& j);
//! Columns index,p_value,method,seed; seed is empty unless recorded.
std::string pvalues_to_csv(const PValueVector& p);
PValueVector parse_pvalues_csv(std::string_view text);

json to_json(const WeightedKde& kde);
WeightedKde kde_from_json(const json& j);

json to_json(const DecisionReport& r);
DecisionReport decision_report_from_json(const json& j);

//! Throws IoError when unreadable, ParseError on malformed JSON.
json read_json(const std::filesystem::path& path);
//! Pretty-printed with a trailing newline; throws IoError.
void write_json(const std::filesystem::path& path, const json& j);

} // namespace confshift::io

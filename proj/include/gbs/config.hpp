#pragma once

#include "gbs/sim/harness.hpp"

#include "json.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace gbs {

using json = nlohmann::json;

// Run configuration as JSON. Every accepted key appears in default_config();
// anything else is rejected so typos never pass silently.
json default_config();

// Ablation rows: baseline, fl, crs, gbt, gbr, gbt_gbr, crs_gbr, crs_gbt, full,
// plus naive (full with score-blind resampling).
std::vector<std::string> preset_names();
json preset(std::string_view name);

// Recursively overlays `patch` onto `base`. Throws InputError on unknown keys
// or when a value's JSON type differs from the default's.
void merge_config(json& base, const json& patch, const std::string& where = "");

// Applies one "dotted.key=value" override. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(json& cfg, std::string_view assignment);

// Sets crs/gbr/threshold mode/loss from a comma list of crs,gbt,gbr,fl or
// "none".
void apply_toggles(json& cfg, std::string_view toggles);

sim::HarnessConfig harness_config_from_json(const json& cfg);

// JSON Schema (draft 2020-12) describing default_config().
json config_schema();

}  // namespace gbs

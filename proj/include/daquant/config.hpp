// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value config files with dotted sections, plus CSV emission.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "daquant/sim.hpp"

namespace daquant {

using ConfigMap = std::map<std::string, std::string>;

// Parse `key=value` lines; '#' starts a comment, blanks are skipped.
// Duplicate keys: last one wins.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

// Apply `key=value` override strings on top of a parsed map.
void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides);

// Build the experiment config; unknown keys are rejected with their path.
// `schemes_out`, when non-null, receives the compare-mode scheme list.
ExperimentConfig config_from_map(const ConfigMap& map,
                                 std::vector<Scheme>* schemes_out = nullptr,
                                 double* target_loss_out = nullptr);

// Resolved config echo: deterministic key order, re-parsable.
std::string config_echo(const ConfigMap& map);

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// 17 significant digits; round-trips doubles exactly.
std::string format_double(double v);

// schema-version header row, then the column header, then one row per
// record. UTF-8, comma-separated, LF line endings.
std::string metrics_csv(const std::vector<MetricsRecord>& records);
void write_file(const std::string& path, const std::string& content);

}  // namespace daquant

#pragma once

// Scenario files: INI-style sections with `key = value` lines. Values may be
// quoted strings, numbers, booleans or bracketed lists such as [1.0, 2.0].
// `scenario.case` selects the built-in defaults the rest of the file
// overrides. Unknown sections or keys are rejected.

#include "ssampc/sim.hpp"

#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace ssampc {

/// Reads a scenario file. Throws ConfigError on I/O, syntax, unknown keys or
/// invalid values.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(std::istream& in, const std::string& source = "<input>");

/// Applies one `section.key=value` assignment. Throws ConfigError.
void apply_override(Scenario& s, const std::string& assignment);
void set_value(Scenario& s, const std::string& section, const std::string& key, const std::string& value);

/// Every configurable key with its current value, in file order.
std::vector<std::pair<std::string, std::string>> scenario_entries(const Scenario& s);

/// Serializes a scenario so that parse_scenario reproduces it.
std::string scenario_to_text(const Scenario& s);

}  // namespace ssampc

#pragma once

// Scenario files: flat INI documents with [model], [regime], [sim] and
// [output] sections. Run manifests use the same format plus a [manifest]
// section, so a manifest can be fed back in as a scenario.

#include "phtraffic/model.hpp"
#include "phtraffic/sde.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phtraffic {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

/// Malformed or incomplete scenario document.
class ScenarioError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct OutputOptions {
  bool svg = true;
  /// Export raw positions instead of positions mod L.
  bool unwrapped = false;
};

struct ScenarioFile {
  ModelParams model;
  SimConfig sim;
  OutputOptions output;
  /// Name of the preset the scenario came from, empty if none.
  std::string preset_name;
};

/// "fig1" (uncontrolled), "fig2" (open loop), "fig3" (closed loop).
ScenarioFile preset(std::string_view name);
std::vector<std::string> preset_names();

ScenarioFile parse_scenario(std::istream& in);
ScenarioFile load_scenario(const std::filesystem::path& path);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Scenario document with unit comments. `manifest` entries, if any, are
/// appended in a [manifest] section after schema/tool version and preset.
std::string format_scenario(const ScenarioFile& scenario, const KeyValues& manifest = {});

/// Shortest decimal string that parses back to the same double.
std::string format_number(double value);
double parse_number(std::string_view text);

}  // namespace phtraffic

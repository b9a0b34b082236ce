#pragma once

// Scenario files: which plant, which controller, the tilt schedule and the
// simulation settings.
//
//   plant = ecp220                 # preset name or parameter-file path
//   controller = paper             # paper | inline | synthesis-report path
//   controller.scale = 0.3         # optional overrides (also controller.gains for inline)
//   tilt.mode = step               # step | linear
//   tilt = 0 0                     # breakpoints "t phi", repeatable
//   tilt = 2 0.15
//   tilt = 8 0
//   coupling_gain = 0.2
//   dt = 0.001
//   duration = 15
//   quantize = true
//   counts_per_rev = 16000
//   seed = 1
//   x0 = 0 0 0 0
//   empirical_gain = false
//
// Relative paths are resolved against the scenario file's directory.

#include <optional>
#include <string>
#include <vector>

#include "segway/controller.hpp"
#include "segway/plant_model.hpp"
#include "segway/simulation.hpp"
#include "segway/text_format.hpp"

namespace segway::sim {

struct Scenario {
  std::string plant_id = "ecp220";
  StateSpace plant = preset_ecp220();
  std::string controller_source = "paper";
  ControllerConfig controller = paper_controller();
  /// Full-information gain for the empirical L2 measurement, when known.
  std::optional<RowVector4> k_bar;
  DisturbanceProfile disturbance = DisturbanceProfile::maneuver();
  SimConfig config;
  PlantState x0;
  bool empirical_gain = false;
  /// Files the scenario pulled in (for run manifests).
  std::vector<std::string> referenced_files;

  static Scenario parse(const std::string& text, const std::string& source = "<text>",
                        const std::string& base_dir = ".");
  static Scenario load(const std::string& path);
  static Scenario from_document(const KeyValueDocument& doc, const std::string& base_dir);

  /// Serializes with an inline controller so the file is self-contained.
  KeyValueDocument to_document() const;
};

/// The default hand maneuver with the published controller and encoder quantization.
Scenario default_scenario();

/// Resolves `path` relative to `base_dir` unless it is absolute.
std::string resolve_path(const std::string& base_dir, const std::string& path);

}  // namespace segway::sim

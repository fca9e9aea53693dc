#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "rbslam/simulation.hpp"

namespace rbslam {

enum class ScenarioKind { radio_square, radio_line, magnetic_3d, visual2d, localization };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);  // throws ConfigError

enum class Method { PF, PS, EKF, EKS, localize };

std::string to_string(Method m);
Method method_from_string(const std::string& name);  // throws ConfigError

/// Known-map localization: the true map is handed to the filter with zero
/// covariance and the initial pose cloud is uniform over the path region.
struct LocalizationScenario {
  RadioScenario radio{};     // path, map and sensor settings
  double position_var = 1e-3;  // per-step position process noise [m^2]
  double init_margin = 0.0;    // cloud region = path bounding box grown by this much [m]
  bool heading_known = true;
};

struct ExportOptions {
  bool trajectories = true;
  bool maps = true;
  int map_grid_points = 40;  // per axis
  int detail_runs = 1;       // map grids, landmarks and PF lineages are written for run ids < detail_runs
};

struct ExperimentManifest {
  ScenarioKind scenario = ScenarioKind::radio_square;
  std::vector<Method> methods;
  std::string output_dir = "out";
  int workers = 1;
  std::uint64_t seed = 0;
  int monte_carlo_runs = 20;
  int particles = 100;
  int smoother_samples = 50;
  /// Perturbation sweep: magnetometer bias (magnetic_3d) or landmark
  /// initialization variance (visual2d). Other scenarios use a single level 0.
  std::vector<double> levels{0.0};
  double prune_log_ratio = 50.0;
  RadioScenario radio{};
  MagneticScenario magnetic{};
  VisualScenario visual{};
  LocalizationScenario localization{};
  ExportOptions exports{};

  bool has(Method m) const;
};

/// Defaults for a scenario at desk scale.
ExperimentManifest default_manifest(ScenarioKind kind);
/// Monte Carlo counts and sweep levels of the original study.
void apply_full_scale(ExperimentManifest& m);

/// The desk-scale study behind figure 4 (square degeneracy), 5 (line),
/// 7 (magnetic bias sweep) or 8 (visual initialization sweep), with seed 1.
/// Throws ConfigError for any other number.
ExperimentManifest figure_manifest(int figure);

/// Strict parse: unknown keys, wrong types and invalid values raise ConfigError
/// naming the key path. "seed" is mandatory.
ExperimentManifest parse_manifest(const nlohmann::json& j);
ExperimentManifest load_manifest(const std::string& path);

/// Fully resolved manifest; parse_manifest(to_json(m)) reproduces m.
nlohmann::json to_json(const ExperimentManifest& m);

}  // namespace rbslam

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rbslam/experiment.hpp"

namespace rbslam {

/// First line of every CSV written by this library.
std::string provenance_line(std::uint64_t seed);

/// Writes the artifact tree of an experiment below `dir`:
///   resolved_config.json, results.csv, box_stats.csv, metrics.csv,
///   degeneracy.csv, trajectories/{method}_L{level}.csv,
///   maps/{method}_L{level}_run{run}.csv, landmarks_L{level}.csv, run_log.txt.
/// Everything except run_log.txt is a pure function of the manifest.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

/// Writes truth.csv, odometry.csv, measurements.csv and metadata.json for one
/// simulated repetition into `dir`.
void write_simulation(const ExperimentManifest& manifest, int level_index, int run_id,
                      const std::filesystem::path& dir);

/// Human-readable digest: median RMSE per (level, method) and the medians of
/// the scalar per-run metrics.
void print_summary(const ExperimentResult& result, std::ostream& os);

/// One row of results.csv.
struct ResultRow {
  std::string scenario;
  double level = 0.0;
  std::string method;
  int run_id = 0;
  double rmse = 0.0;
};

std::vector<ResultRow> read_results_csv(const std::filesystem::path& file);
/// box_stats.csv for arbitrary result rows, grouped by (scenario, level, method)
/// in order of first appearance.
void write_box_stats(const std::vector<ResultRow>& rows, std::uint64_t seed, const std::filesystem::path& file);

}  // namespace rbslam

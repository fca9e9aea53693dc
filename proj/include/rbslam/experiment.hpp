#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rbslam/config.hpp"

namespace rbslam {

/// One exported trajectory. `orientation` rows hold the heading (planar) or
/// the quaternion (w, x, y, z).
struct TrajectoryExport {
  std::string method;  // PF, PS, EKF, EKS, localize, truth, odometry
  int sample_k = 0;    // PF: -1 weighted mean, i >= 0 final lineage i; PS: sample index
  double weight = 1.0;
  std::vector<Eigen::VectorXd> position;
  std::vector<Eigen::VectorXd> orientation;
};

struct MapGridExport {
  std::string method;  // truth or an estimator
  std::vector<Eigen::VectorXd> points;
  Eigen::MatrixXd mean;      // points x outputs
  Eigen::MatrixXd variance;  // points x outputs
};

struct LandmarkExport {
  std::string method;
  Eigen::VectorXd estimate;  // [x_1, y_1, ...], aligned into the truth frame
  Eigen::VectorXd truth;
};

struct Metric {
  std::string name;
  int index = 0;
  double value = 0.0;
};

struct MethodResult {
  Method method = Method::PF;
  double rmse = 0.0;
  std::vector<Metric> metrics;
  double seconds = 0.0;  // wall clock, run log only

  /// Value of the first metric called `name` (nullopt if absent).
  std::optional<double> metric(const std::string& name) const;
  std::vector<double> metric_values(const std::string& name) const;
};

struct DegeneracyExport {
  std::string method;
  std::vector<int> counts;  // per t
};

struct RunOutput {
  int level_index = 0;
  double level = 0.0;
  int run_id = 0;
  std::vector<MethodResult> methods;
  std::vector<TrajectoryExport> trajectories;
  std::vector<MapGridExport> maps;
  std::vector<LandmarkExport> landmarks;
  std::vector<DegeneracyExport> degeneracy;
  std::vector<int> turn_steps;
  double seconds = 0.0;

  const MethodResult* find(Method m) const;
};

struct ExperimentResult {
  ExperimentManifest manifest;
  std::vector<RunOutput> runs;  // ordered by (level index, run id)
  double seconds = 0.0;

  /// Per-run RMSE of `m` at a level, in run order.
  std::vector<double> rmse(int level_index, Method m) const;
  /// Per-run values of a named metric, concatenated in run order.
  std::vector<double> metric(int level_index, Method m, const std::string& name) const;
};

/// Called by the collector (one thread) as each run finishes.
using ProgressFn = std::function<void(const RunOutput&)>;

/// Runs every (level, repetition) of the manifest on a pool of
/// `manifest.workers` threads. With one worker the per-particle kernels use
/// OpenMP instead. Results do not depend on the worker count.
ExperimentResult run_experiment(const ExperimentManifest& manifest, const ProgressFn& progress = {});

/// Seed subtree of the simulated data of repetition `run_id` (shared by every level).
SeedStream simulation_seeds(const ExperimentManifest& manifest, int run_id);

/// A single repetition, as run by a worker.
RunOutput run_single(const ExperimentManifest& manifest, int level_index, int run_id, ExecPolicy policy);

}  // namespace rbslam

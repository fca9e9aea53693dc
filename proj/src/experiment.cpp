#include "rbslam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include "rbslam/baselines.hpp"
#include "rbslam/evaluation.hpp"
#include "rbslam/simulation.hpp"

namespace rbslam {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Seed tree below the manifest seed: simulation and inference streams are keyed
// by the repetition only, so runs are paired across perturbation levels.
enum : std::uint64_t { kSimRoot = 1, kInferenceRoot = 2, kCloudRoot = 3 };

Eigen::VectorXd orientation_of(const PosePlanar& p) { return Eigen::VectorXd::Constant(1, p.heading); }
Eigen::VectorXd orientation_of(const Pose3D& p) {
  const auto& q = p.orientation;
  return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
}

template <class Dyn>
TrajectoryExport make_export(std::string method, int k, double w, const std::vector<typename Dyn::Pose>& poses) {
  TrajectoryExport e{std::move(method), k, w, {}, {}};
  for (const auto& p : poses) {
    e.position.push_back(Dyn::position(p));
    e.orientation.push_back(orientation_of(p));
  }
  return e;
}

/// Marginal weighted means as an exportable trajectory (orientation: circular
/// mean of the heading for planar poses, the highest-weight particle's attitude in 3D).
template <class Dyn>
TrajectoryExport weighted_mean_export(std::string method, const ParticleHistory<typename Dyn::Pose>& H) {
  TrajectoryExport e{std::move(method), -1, 1.0, weighted_mean_positions<Dyn>(H), {}};
  if constexpr (Dyn::kSpatialDim == 2) {
    for (double h : weighted_mean_yaw<Dyn>(H)) e.orientation.push_back(Eigen::VectorXd::Constant(1, h));
  } else {
    for (int t = 0; t < H.steps(); ++t) {
      Eigen::Index best = 0;
      H.weights[t].maxCoeff(&best);
      e.orientation.push_back(orientation_of(H.poses[t][best]));
    }
  }
  return e;
}

/// Number of distinct states among the smoother samples at each step.
template <class Dyn>
std::vector<int> distinct_states(const std::vector<SmootherSample<typename Dyn::Pose>>& samples) {
  if (samples.empty()) return {};
  const std::size_t T = samples.front().trajectory.size();
  std::vector<int> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::set<std::vector<double>> seen;
    for (const auto& s : samples) {
      const auto& p = s.trajectory[t];
      const Eigen::VectorXd pos = Dyn::position(p);
      const Eigen::VectorXd ori = orientation_of(p);
      std::vector<double> key(pos.data(), pos.data() + pos.size());
      key.insert(key.end(), ori.data(), ori.data() + ori.size());
      seen.insert(std::move(key));
    }
    out[t] = static_cast<int>(seen.size());
  }
  return out;
}

std::vector<Eigen::VectorXd> landmark_points(const Eigen::VectorXd& theta) {
  std::vector<Eigen::VectorXd> pts;
  for (Eigen::Index j = 0; j + 1 < theta.size(); j += 2) pts.push_back(theta.segment<2>(j));
  return pts;
}

Eigen::VectorXd flatten(const std::vector<Eigen::VectorXd>& pts) {
  Eigen::VectorXd out(2 * static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) out.segment<2>(2 * static_cast<Eigen::Index>(j)) = pts[j];
  return out;
}

/// Scenario-specific pieces used by the shared estimator driver.
template <class Dyn>
struct ScenarioHooks {
  using Pose = typename Dyn::Pose;
  std::vector<Pose> truth;
  /// RMSE of a position sequence, given the estimator's map mean (used for alignment).
  std::function<double(const std::vector<Eigen::VectorXd>&, const Eigen::VectorXd&)> score;
  /// Optional map export for a belief.
  std::function<void(const std::string&, const GaussianMapBelief&, RunOutput&)> export_map;
  std::vector<int> turn_steps;
  bool detail = false;
};

template <class Dyn, class Sensor>
void run_estimators(const ExperimentManifest& m, const SlamProblem<Dyn, Sensor>& prob, const ScenarioHooks<Dyn>& hk,
                    const SeedStream& seeds, ExecPolicy policy, RunOutput& out) {
  using Pose = typename Dyn::Pose;
  const int T = prob.steps();
  const auto truth_pos = positions_of<Dyn>(hk.truth);
  FilterOptions opt;
  opt.policy = policy;
  opt.prune_log_ratio = m.prune_log_ratio;

  const bool planar = Dyn::kSpatialDim == 2;
  const int mid_turn = hk.turn_steps.empty() ? -1 : hk.turn_steps[hk.turn_steps.size() / 2];

  std::optional<SmootherResult<Pose>> smoother;
  std::optional<FilterResult<Pose>> filter;
  double smoother_seconds = 0.0;
  if (m.has(Method::PS)) {
    const auto t0 = Clock::now();
    smoother = mcmc_smoother_run(prob, m.particles, m.smoother_samples, seeds, opt);
    smoother_seconds = since(t0);
  }

  if (m.has(Method::PF)) {
    const auto t0 = Clock::now();
    // The smoother's initial filter uses the same seeds as a standalone run.
    if (!smoother) filter = rbpf_as_run(prob, m.particles, seeds.child(0), opt);
    const FilterResult<Pose>& F = smoother ? smoother->initial_filter : *filter;
    const auto& H = F.history;
    MethodResult r;
    r.method = Method::PF;
    Eigen::VectorXd map_mean = Eigen::VectorXd::Zero(prob.prior.dim());
    for (int i = 0; i < H.particles(); ++i) map_mean += H.weights.back()[i] * F.beliefs[i].mean;
    const TrajectoryExport mean_traj = weighted_mean_export<Dyn>("PF", H);
    r.rmse = hk.score(mean_traj.position, map_mean);
    const std::vector<int> profile = unique_ancestor_profile(H.ancestors);
    r.metrics.push_back({"unique_ancestors_half", 0, static_cast<double>(profile[T / 2])});
    r.metrics.push_back({"unique_ancestors_first", 0, static_cast<double>(profile.front())});
    if constexpr (planar) {
      std::vector<double> yaw;
      for (const auto& o : mean_traj.orientation) yaw.push_back(o[0]);
      r.metrics.push_back({"heading_msd", 0, mean_sq_second_difference(yaw, hk.turn_steps)});
    }
    r.metrics.push_back({"dropped_rows", 0, static_cast<double>(F.dropped_rows)});
    out.degeneracy.push_back({"PF", profile});
    if (m.exports.trajectories) {
      out.trajectories.push_back(mean_traj);
      if (hk.detail)
        for (int i = 0; i < H.particles(); ++i)
          out.trajectories.push_back(make_export<Dyn>("PF", i, H.weights.back()[i], H.trajectory(i)));
    }
    if (hk.detail && hk.export_map) {
      Eigen::Index best = 0;
      H.weights.back().maxCoeff(&best);
      hk.export_map("PF", F.beliefs[best], out);
    }
    // Sharing the smoother's first run: charge it one of its K + 1 filter passes.
    r.seconds = smoother ? smoother_seconds / (m.smoother_samples + 1) : since(t0);
    out.methods.push_back(std::move(r));
  }

  if (smoother) {
    const auto& S = smoother->samples;
    const int K = static_cast<int>(S.size());
    MethodResult r;
    r.method = Method::PS;
    r.seconds = smoother_seconds;
    std::vector<Eigen::VectorXd> mean_pos(T, Eigen::VectorXd::Zero(Dyn::kSpatialDim));
    Eigen::VectorXd map_mean = Eigen::VectorXd::Zero(prob.prior.dim());
    for (const auto& s : S) {
      for (int t = 0; t < T; ++t) mean_pos[t] += Dyn::position(s.trajectory[t]) / K;
      map_mean += s.map.mean / K;
    }
    r.rmse = hk.score(mean_pos, map_mean);
    for (const auto& s : S) {
      r.metrics.push_back({"sample_rmse", s.k, hk.score(positions_of<Dyn>(s.trajectory), s.map.mean)});
      if constexpr (planar)
        r.metrics.push_back({"heading_msd", s.k, mean_sq_second_difference(yaw_of<Dyn>(s.trajectory), hk.turn_steps)});
    }
    const std::vector<int> distinct = distinct_states<Dyn>(S);
    r.metrics.push_back({"distinct_half", 0, static_cast<double>(distinct[T / 2])});
    if (mid_turn >= 0) r.metrics.push_back({"distinct_after_turn", 0, static_cast<double>(distinct[mid_turn + 1])});
    out.degeneracy.push_back({"PS", distinct});
    if (m.exports.trajectories)
      for (const auto& s : S) out.trajectories.push_back(make_export<Dyn>("PS", s.k, 1.0 / K, s.trajectory));
    if (hk.detail && hk.export_map) hk.export_map("PS", S.back().map, out);
    out.methods.push_back(std::move(r));
  }

  if (m.has(Method::EKF) || m.has(Method::EKS)) {
    const auto t0 = Clock::now();
    const EkfResult<Pose> ekf = ekf_slam_run(prob);
    const double ekf_seconds = since(t0);
    const auto& last = ekf.steps.back().filtered;
    GaussianMapBelief map{last.theta, last.cov.bottomRightCorner(prob.prior.dim(), prob.prior.dim())};
    if (m.has(Method::EKF)) {
      MethodResult r;
      r.method = Method::EKF;
      r.seconds = ekf_seconds;
      const auto poses = poses_of(ekf);
      r.rmse = hk.score(positions_of<Dyn>(poses), map.mean);
      r.metrics.push_back({"dropped_rows", 0, static_cast<double>(ekf.dropped_rows)});
      if (m.exports.trajectories) out.trajectories.push_back(make_export<Dyn>("EKF", 0, 1.0, poses));
      if (hk.detail && hk.export_map) hk.export_map("EKF", map, out);
      out.methods.push_back(std::move(r));
    }
    if (m.has(Method::EKS)) {
      const auto t1 = Clock::now();
      const auto smoothed = eks_smooth(prob, ekf);
      MethodResult r;
      r.method = Method::EKS;
      r.seconds = ekf_seconds + since(t1);
      const auto poses = poses_of(smoothed);
      r.rmse = hk.score(positions_of<Dyn>(poses), map.mean);
      if (m.exports.trajectories) out.trajectories.push_back(make_export<Dyn>("EKS", 0, 1.0, poses));
      out.methods.push_back(std::move(r));
    }
  }

  if (m.exports.trajectories) {
    out.trajectories.push_back(make_export<Dyn>("truth", 0, 1.0, hk.truth));
    std::vector<Pose> odo{prob.x0};
    for (int t = 0; t + 1 < T; ++t) odo.push_back(prob.dynamics.propagate_mean(odo.back(), prob.odometry[t]));
    out.trajectories.push_back(make_export<Dyn>("odometry", 0, 1.0, odo));
  }
}

MapGridExport grid_export(const std::string& method, const GaussianMapBelief& b, const BasisDomain& dom,
                          MapKind kind, int channels, const std::vector<Eigen::VectorXd>& grid) {
  const FieldPrediction f = predict_field(b, dom, kind, grid, channels);
  return {method, grid, f.mean, f.variance};
}

void run_radio(const ExperimentManifest& m, RadioScenario cfg, int run_id, const SeedStream& sim,
               const SeedStream& inf, ExecPolicy policy, RunOutput& out) {
  cfg.shape = m.scenario == ScenarioKind::radio_line ? RadioShape::line : RadioShape::square;
  const RadioRun run = gen_radio(cfg, sim);
  const auto& dom = run.problem.sensor.domain();
  ScenarioHooks<PlanarDynamics> hk;
  hk.truth = run.truth;
  hk.turn_steps = run.turn_steps;
  hk.detail = run_id < m.exports.detail_runs;
  const auto truth_pos = positions_of<PlanarDynamics>(run.truth);
  hk.score = [truth_pos](const std::vector<Eigen::VectorXd>& p, const Eigen::VectorXd&) { return rmse(p, truth_pos); };
  const auto grid = domain_grid(dom, m.exports.map_grid_points);
  if (m.exports.maps) {
    hk.export_map = [&](const std::string& name, const GaussianMapBelief& b, RunOutput& o) {
      o.maps.push_back(grid_export(name, b, dom, MapKind::radio, cfg.channels, grid));
    };
    if (hk.detail) {
      const GaussianMapBelief truth{run.theta, Eigen::MatrixXd::Zero(run.theta.size(), run.theta.size())};
      out.maps.push_back(grid_export("truth", truth, dom, MapKind::radio, cfg.channels, grid));
    }
  }
  out.turn_steps = run.turn_steps;
  run_estimators(m, run.problem, hk, inf, policy, out);
}

void run_magnetic(const ExperimentManifest& m, double bias, int run_id, const SeedStream& sim, const SeedStream& inf,
                  ExecPolicy policy, RunOutput& out) {
  MagneticScenario cfg = m.magnetic;
  cfg.bias = bias;
  const MagneticRun run = gen_magnetic(cfg, sim);
  ScenarioHooks<Pose3DDynamics> hk;
  hk.truth = run.truth;
  hk.detail = run_id < m.exports.detail_runs;
  const auto truth_pos = positions_of<Pose3DDynamics>(run.truth);
  hk.score = [truth_pos](const std::vector<Eigen::VectorXd>& p, const Eigen::VectorXd&) { return rmse(p, truth_pos); };
  if (m.exports.maps) {
    double z = 0.0;
    for (const auto& p : truth_pos) z += p[2] / static_cast<double>(truth_pos.size());
    const auto& dom = run.problem.sensor.domain();
    const auto grid = domain_grid(dom, m.exports.map_grid_points, 0.0, z);
    hk.export_map = [dom, grid](const std::string& name, const GaussianMapBelief& b, RunOutput& o) {
      o.maps.push_back(grid_export(name, b, dom, MapKind::magnetic, 1, grid));
    };
    if (hk.detail) {
      const auto n = run.theta_truth.size();
      const GaussianMapBelief truth{run.theta_truth, Eigen::MatrixXd::Zero(n, n)};
      out.maps.push_back(grid_export("truth", truth, run.truth_domain, MapKind::magnetic, 1, grid));
    }
  }
  run_estimators(m, run.problem, hk, inf, policy, out);
}

void run_visual(const ExperimentManifest& m, double init_var, int run_id, const SeedStream& sim,
                const SeedStream& inf, ExecPolicy policy, RunOutput& out) {
  VisualScenario cfg = m.visual;
  cfg.init_var = init_var;
  const VisualRun run = gen_visual2d(cfg, sim);
  ScenarioHooks<PlanarDynamics> hk;
  hk.truth = run.truth;
  hk.detail = run_id < m.exports.detail_runs;
  const auto truth_pos = positions_of<PlanarDynamics>(run.truth);
  const auto truth_lm = landmark_points(run.landmarks);
  // Similarity alignment estimated from the learned landmarks, applied to the path.
  hk.score = [truth_pos, truth_lm](const std::vector<Eigen::VectorXd>& p, const Eigen::VectorXd& lm) {
    const AlignmentResult a = procrustes_align(landmark_points(lm), truth_lm, true);
    std::vector<Eigen::VectorXd> aligned;
    aligned.reserve(p.size());
    for (const auto& x : p) aligned.push_back(a.apply(x));
    return rmse(aligned, truth_pos);
  };
  if (m.exports.maps) {
    hk.export_map = [truth_lm, theta = run.landmarks](const std::string& name, const GaussianMapBelief& b,
                                                      RunOutput& o) {
      const AlignmentResult a = procrustes_align(landmark_points(b.mean), truth_lm, true);
      std::vector<Eigen::VectorXd> aligned;
      for (const auto& x : landmark_points(b.mean)) aligned.push_back(a.apply(x));
      o.landmarks.push_back({name, flatten(aligned), theta});
    };
  }
  run_estimators(m, run.problem, hk, inf, policy, out);
}

void run_localization(const ExperimentManifest& m, int run_id, const SeedStream& sim, const SeedStream& inf,
                      const SeedStream& cloud_seeds, ExecPolicy policy, RunOutput& out) {
  const LocalizationScenario& lc = m.localization;
  RadioRun run = gen_radio(lc.radio, sim);
  auto& prob = run.problem;
  const auto n = run.theta.size();
  prob.prior = GaussianMapBelief{run.theta, Eigen::MatrixXd::Zero(n, n)};
  for (auto& o : prob.odometry) o.noise.Qp = (lc.position_var / o.noise.dt) * Eigen::Matrix2d::Identity();

  std::vector<Eigen::VectorXd> pts = positions_of<PlanarDynamics>(run.truth);
  Eigen::Vector2d lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p.head<2>());
    hi = hi.cwiseMax(p.head<2>());
  }
  lo.array() -= lc.init_margin;
  hi.array() += lc.init_margin;
  Rng rng = cloud_seeds.engine();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PosePlanar> cloud;
  for (int i = 0; i < m.particles; ++i) {
    const Eigen::Vector2d p(lo.x() + (hi.x() - lo.x()) * u(rng), lo.y() + (hi.y() - lo.y()) * u(rng));
    const double h = lc.heading_known ? run.truth.front().heading : 2.0 * std::numbers::pi * u(rng);
    cloud.emplace_back(p, h);
  }

  const auto t0 = Clock::now();
  const ParticleHistory<PosePlanar> H = localize_known_map(prob, cloud, inf, policy);
  MethodResult r;
  r.method = Method::localize;
  r.seconds = since(t0);
  const auto est = weighted_mean_positions<PlanarDynamics>(H);
  r.rmse = rmse(est, pts);
  r.metrics.push_back({"final_error", 0, (est.back() - pts.back()).norm()});
  r.metrics.push_back({"lengthscale", 0, lc.radio.hyper.ell});
  out.methods.push_back(std::move(r));
  if (m.exports.trajectories) {
    out.trajectories.push_back(weighted_mean_export<PlanarDynamics>("localize", H));
    out.trajectories.push_back(make_export<PlanarDynamics>("truth", 0, 1.0, run.truth));
  }
  if (m.exports.maps && run_id < m.exports.detail_runs) {
    const auto& dom = prob.sensor.domain();
    out.maps.push_back(grid_export("truth", prob.prior, dom, MapKind::radio, lc.radio.channels,
                                   domain_grid(dom, m.exports.map_grid_points)));
  }
  out.turn_steps = run.turn_steps;
}

}  // namespace

SeedStream simulation_seeds(const ExperimentManifest& m, int run_id) {
  return SeedStream(m.seed).child({kSimRoot, static_cast<std::uint64_t>(run_id)});
}

std::optional<double> MethodResult::metric(const std::string& name) const {
  for (const auto& x : metrics)
    if (x.name == name) return x.value;
  return std::nullopt;
}

std::vector<double> MethodResult::metric_values(const std::string& name) const {
  std::vector<double> out;
  for (const auto& x : metrics)
    if (x.name == name) out.push_back(x.value);
  return out;
}

const MethodResult* RunOutput::find(Method m) const {
  for (const auto& r : methods)
    if (r.method == m) return &r;
  return nullptr;
}

std::vector<double> ExperimentResult::rmse(int level_index, Method m) const {
  std::vector<double> out;
  for (const auto& r : runs)
    if (r.level_index == level_index)
      if (const MethodResult* x = r.find(m)) out.push_back(x->rmse);
  return out;
}

std::vector<double> ExperimentResult::metric(int level_index, Method m, const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : runs)
    if (r.level_index == level_index)
      if (const MethodResult* x = r.find(m)) {
        const auto v = x->metric_values(name);
        out.insert(out.end(), v.begin(), v.end());
      }
  return out;
}

RunOutput run_single(const ExperimentManifest& m, int level_index, int run_id, ExecPolicy policy) {
  const auto t0 = Clock::now();
  RunOutput out;
  out.level_index = level_index;
  out.level = m.levels.at(level_index);
  out.run_id = run_id;
  const SeedStream root(m.seed);
  const auto rid = static_cast<std::uint64_t>(run_id);
  const SeedStream sim = simulation_seeds(m, run_id);
  const SeedStream inf = root.child({kInferenceRoot, rid});
  switch (m.scenario) {
    case ScenarioKind::radio_square:
    case ScenarioKind::radio_line:
      run_radio(m, m.radio, run_id, sim, inf, policy, out);
      break;
    case ScenarioKind::magnetic_3d:
      run_magnetic(m, out.level, run_id, sim, inf, policy, out);
      break;
    case ScenarioKind::visual2d:
      run_visual(m, out.level, run_id, sim, inf, policy, out);
      break;
    case ScenarioKind::localization:
      run_localization(m, run_id, sim, inf, root.child({kCloudRoot, rid}), policy, out);
      break;
  }
  out.seconds = since(t0);
  return out;
}

ExperimentResult run_experiment(const ExperimentManifest& m, const ProgressFn& progress) {
  const auto t0 = Clock::now();
  struct Task {
    int level;
    int run;
  };
  std::vector<Task> tasks;
  for (int l = 0; l < static_cast<int>(m.levels.size()); ++l)
    for (int r = 0; r < m.monte_carlo_runs; ++r) tasks.push_back({l, r});

  const int workers = std::max(1, std::min<int>(m.workers, static_cast<int>(tasks.size())));
  const ExecPolicy inner = workers == 1 ? ExecPolicy::parallel : ExecPolicy::serial;

  std::vector<std::optional<RunOutput>> slots(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        RunOutput r = run_single(m, tasks[i].level, tasks[i].run, inner);
        std::lock_guard<std::mutex> lock(mu);
        if (progress) progress(r);
        slots[i] = std::move(r);
      } catch (...) {
        errors[i] = std::current_exception();
        next = tasks.size();  // stop handing out work
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult res;
  res.manifest = m;
  for (auto& s : slots) res.runs.push_back(std::move(*s));
  res.seconds = since(t0);
  return res;
}

}  // namespace rbslam

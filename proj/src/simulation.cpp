#include "rbslam/simulation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "rbslam/errors.hpp"

namespace rbslam {

namespace {

constexpr double kPi = std::numbers::pi;

// Substream purposes below stream_tag::kSimulation.
enum : std::uint64_t { kMap = 1, kOdometry = 2, kMeasurement = 3, kLandmarkInit = 4, kLayout = 5 };

Rng sim_rng(const SeedStream& seeds, std::uint64_t purpose) {
  return seeds.child({stream_tag::kSimulation, purpose}).engine();
}

double normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> bounding_box(const std::vector<Eigen::VectorXd>& pts) {
  Eigen::VectorXd lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

// Nominal planar path from straight and turn-in-place segments, in the body frame.
struct PathStep {
  double forward;
  double turn;
};

RadioRun make_radio_run(const RadioScenario& cfg, const SeedStream& seeds, const std::vector<PathStep>& path,
                        double lateral_margin) {
  if (cfg.basis < 1 || cfg.channels < 1) throw Error("radio scenario: basis and channels must be positive");
  RadioRun run;
  run.truth.emplace_back(Eigen::Vector2d::Zero(), 0.0);
  for (const auto& s : path) {
    const PosePlanar& cur = run.truth.back();
    run.truth.emplace_back(cur.position + rot2(cur.heading) * Eigen::Vector2d(s.forward, 0.0), cur.heading + s.turn);
  }

  std::vector<Eigen::VectorXd> pts;
  for (const auto& p : run.truth) pts.push_back(p.position);
  auto [lo, hi] = bounding_box(pts);
  auto [dlo, dhi] = inflate_box(lo, hi, cfg.hyper.ell);
  if (lateral_margin > 0.0) {
    dlo[1] = std::min(dlo[1], lo[1] - lateral_margin);
    dhi[1] = std::max(dhi[1], hi[1] + lateral_margin);
  }
  BasisDomain dom = make_basis_domain(dlo, dhi, cfg.basis);

  Rng map_rng = sim_rng(seeds, kMap);
  run.theta = sample_map_from_prior(dom, cfg.hyper, MapKind::radio, map_rng, cfg.channels);

  RadioProblem& prob = run.problem;
  prob.dynamics = PlanarDynamics(IncrementFrame::body);
  prob.sensor = RadioSensor(dom, cfg.hyper, cfg.channels);
  prob.prior = prior_belief(dom, cfg.hyper, MapKind::radio, cfg.channels);
  prob.x0 = run.truth.front();

  // Position odometry is exact; the heading increment carries the noise of the
  // step so that the truth satisfies h' = h + dq + w with w ~ N(0, Q_t).
  Rng odo_rng = sim_rng(seeds, kOdometry);
  for (std::size_t t = 0; t < path.size(); ++t) {
    const bool turn = path[t].turn != 0.0;
    const double q = turn ? cfg.turn_var : cfg.straight_var;
    PlanarOdometry o;
    o.increment.dp = Eigen::Vector2d(path[t].forward, 0.0);
    o.increment.dq = path[t].turn - std::sqrt(q) * normal(odo_rng);
    o.noise.Qq = q;
    o.noise.dt = 1.0;
    prob.odometry.push_back(o);
    if (turn) run.turn_steps.push_back(static_cast<int>(t));
  }

  Rng meas_rng = sim_rng(seeds, kMeasurement);
  for (const auto& p : run.truth) prob.measurements.push_back(prob.sensor.simulate(p, run.theta, meas_rng));
  return run;
}

int steps_for(double length, double step) {
  if (!(step > 0.0) || !(length > 0.0)) throw Error("radio scenario: lengths must be positive");
  return std::max(1, static_cast<int>(std::lround(length / step)));
}

Eigen::Quaterniond attitude(double yaw, double pitch, double roll) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .normalized();
}

}  // namespace

Eigen::VectorXd sample_map_from_prior(const BasisDomain& domain, const KernelHyper& hyper, MapKind kind, Rng& rng,
                                      int channels) {
  const GaussianMapBelief prior = prior_belief(domain, hyper, kind, channels);
  Eigen::VectorXd theta = prior.mean;
  for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += std::sqrt(prior.cov(j, j)) * normal(rng);
  return theta;
}

RadioRun gen_radio_square(const RadioScenario& cfg, const SeedStream& seeds) {
  const int leg = steps_for(cfg.leg_length, cfg.step_length);
  std::vector<PathStep> path;
  for (int side = 0; side < 4; ++side) {
    for (int k = 0; k < leg; ++k) path.push_back({cfg.step_length, 0.0});
    if (side < 3) path.push_back({0.0, kPi / 2.0});
  }
  return make_radio_run(cfg, seeds, path, 0.0);
}

RadioRun gen_radio_line(const RadioScenario& cfg, const SeedStream& seeds) {
  const int leg = steps_for(cfg.leg_length, cfg.step_length);
  std::vector<PathStep> path;
  for (int k = 0; k < leg; ++k) path.push_back({cfg.step_length, 0.0});
  path.push_back({0.0, kPi});
  for (int k = 0; k < leg; ++k) path.push_back({cfg.step_length, 0.0});
  const double lateral = cfg.lateral_margin >= 0.0 ? cfg.lateral_margin : 6.0 * cfg.hyper.ell;
  return make_radio_run(cfg, seeds, path, lateral);
}

RadioRun gen_radio(const RadioScenario& cfg, const SeedStream& seeds) {
  return cfg.shape == RadioShape::square ? gen_radio_square(cfg, seeds) : gen_radio_line(cfg, seeds);
}

MagneticRun gen_magnetic(const MagneticScenario& cfg, const SeedStream& seeds) {
  if (cfg.steps < 2) throw Error("magnetic scenario: need at least two steps");
  MagneticRun run;
  const double tilt = cfg.tilt_amplitude_deg * kPi / 180.0;
  for (int t = 0; t < cfg.steps; ++t) {
    const double phi = 2.0 * kPi * cfg.laps * t / (cfg.steps - 1);
    Pose3D p;
    p.position = Eigen::Vector3d(cfg.semi_major * std::cos(phi), cfg.semi_minor * std::sin(phi),
                                 cfg.z_amplitude * std::sin(3.0 * phi));
    const double yaw = std::atan2(cfg.semi_minor * std::cos(phi), -cfg.semi_major * std::sin(phi));
    p.orientation = attitude(yaw, tilt * std::cos(3.0 * phi), tilt * std::sin(2.0 * phi));
    run.truth.push_back(p);
  }

  std::vector<Eigen::VectorXd> pts;
  for (const auto& p : run.truth) pts.push_back(p.position);
  auto [lo, hi] = bounding_box(pts);
  auto [dlo, dhi] = inflate_box(lo, hi, cfg.hyper.ell);
  run.truth_domain = make_basis_domain(dlo, dhi, cfg.truth_basis);
  const BasisDomain est_domain = make_basis_domain(dlo, dhi, cfg.basis);

  Rng map_rng = sim_rng(seeds, kMap);
  run.theta_truth = sample_map_from_prior(run.truth_domain, cfg.hyper, MapKind::magnetic, map_rng);

  MagneticProblem& prob = run.problem;
  prob.sensor = MagneticSensor(est_domain, cfg.hyper);
  prob.prior = prior_belief(est_domain, cfg.hyper, MapKind::magnetic);
  prob.x0 = run.truth.front();

  ProcessNoise3D noise;
  noise.Qp = cfg.qp_diag.asDiagonal();
  noise.Qq = (cfg.qq_diag_deg * (kPi / 180.0) * (kPi / 180.0)).asDiagonal();
  noise.dt = cfg.dt;
  Rng odo_rng = sim_rng(seeds, kOdometry);
  for (int t = 0; t + 1 < cfg.steps; ++t) {
    const Pose3D& a = run.truth[t];
    const Pose3D& b = run.truth[t + 1];
    const Eigen::Vector3d ep = sample_gaussian(noise.dt * noise.Qp, odo_rng);
    const Eigen::Vector3d eq = sample_gaussian(noise.dt * noise.Qq, odo_rng);
    Odometry3D o;
    o.noise = noise;
    o.increment.dp = b.position - a.position - ep;
    o.increment.dq = (a.orientation.conjugate() * b.orientation * quat_exp(eq).conjugate()).normalized();
    prob.odometry.push_back(o);
  }

  const MagneticSensor truth_sensor(run.truth_domain, cfg.hyper);
  Rng meas_rng = sim_rng(seeds, kMeasurement);
  for (const auto& p : run.truth) {
    Measurement y = truth_sensor.simulate(p, run.theta_truth, meas_rng);
    y.values[1] += cfg.bias;
    prob.measurements.push_back(std::move(y));
  }
  return run;
}

VisualRun gen_visual2d(const VisualScenario& cfg, const SeedStream& seeds) {
  if (cfg.steps < 2 || cfg.landmarks < 1) throw Error("visual scenario: need steps >= 2 and landmarks >= 1");
  VisualRun run;
  for (int t = 0; t < cfg.steps; ++t) {
    const double phi = 2.0 * kPi * cfg.loops * t / (cfg.steps - 1);
    // Camera on a circle, optical axis pointing radially outwards.
    run.truth.emplace_back(Eigen::Vector2d(cfg.radius * std::cos(phi), cfg.radius * std::sin(phi)), phi - kPi / 2.0);
  }

  Rng layout = sim_rng(seeds, kLayout);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  run.landmarks.resize(2 * cfg.landmarks);
  for (int j = 0; j < cfg.landmarks; ++j) {
    const double ang = 2.0 * kPi * (j + 0.5 * unif(layout)) / cfg.landmarks;
    const double r = cfg.landmark_radius_min + (cfg.landmark_radius_max - cfg.landmark_radius_min) * unif(layout);
    run.landmarks.segment<2>(2 * j) = Eigen::Vector2d(r * std::cos(ang), r * std::sin(ang));
  }

  VisualProblem& prob = run.problem;
  prob.dynamics = PlanarDynamics(IncrementFrame::navigation);
  prob.sensor = Visual2dSensor(cfg.camera, cfg.landmarks, cfg.sigma_v2);
  prob.x0 = run.truth.front();

  // Shared standard-normal draws scaled by the level keep runs paired across levels.
  Rng init_rng = sim_rng(seeds, kLandmarkInit);
  prob.prior.mean = run.landmarks;
  for (Eigen::Index k = 0; k < prob.prior.mean.size(); ++k)
    prob.prior.mean[k] += std::sqrt(cfg.init_var) * normal(init_rng);
  prob.prior.cov = cfg.prior_var * Eigen::MatrixXd::Identity(2 * cfg.landmarks, 2 * cfg.landmarks);

  Rng odo_rng = sim_rng(seeds, kOdometry);
  for (int t = 0; t + 1 < cfg.steps; ++t) {
    const PosePlanar& a = run.truth[t];
    const PosePlanar& b = run.truth[t + 1];
    PlanarOdometry o;
    o.noise.Qp = cfg.qp * Eigen::Matrix2d::Identity();
    o.noise.Qq = cfg.qq;
    o.noise.dt = cfg.dt;
    const Eigen::Vector2d ep(std::sqrt(cfg.dt * cfg.qp) * normal(odo_rng), std::sqrt(cfg.dt * cfg.qp) * normal(odo_rng));
    const double eq = std::sqrt(cfg.dt * cfg.qq) * normal(odo_rng);
    o.increment.dp = b.position - a.position - ep + Eigen::Vector2d(cfg.drift * cfg.dt, 0.0);
    o.increment.dq = wrap_angle(b.heading - a.heading) - eq;
    prob.odometry.push_back(o);
  }

  Rng meas_rng = sim_rng(seeds, kMeasurement);
  for (const auto& p : run.truth) prob.measurements.push_back(prob.sensor.simulate(p, run.landmarks, meas_rng));
  return run;
}

}  // namespace rbslam

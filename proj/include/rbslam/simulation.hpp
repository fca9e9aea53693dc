#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "rbslam/geometry.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/inference.hpp"
#include "rbslam/rng.hpp"
#include "rbslam/sensors.hpp"

namespace rbslam {

using RadioProblem = SlamProblem<PlanarDynamics, RadioSensor>;
using MagneticProblem = SlamProblem<Pose3DDynamics, MagneticSensor>;
using VisualProblem = SlamProblem<PlanarDynamics, Visual2dSensor>;

/// theta ~ N(mu, P) under the model prior.
Eigen::VectorXd sample_map_from_prior(const BasisDomain& domain, const KernelHyper& hyper, MapKind kind, Rng& rng,
                                      int channels = 1);

// --- radio --------------------------------------------------------------------

enum class RadioShape { square, line };

struct RadioScenario {
  RadioShape shape = RadioShape::square;
  KernelHyper hyper{2.0, 0.25, 0.0, 0.01};
  int basis = 128;
  int channels = 1;
  double leg_length = 3.0;       // square side / line length [m]
  double step_length = 0.1;      // [m]
  double turn_var = 0.01;        // heading variance at turn steps [rad^2]
  double straight_var = 1e-6;    // heading variance elsewhere [rad^2]
  double lateral_margin = -1.0;  // extra domain half-width across a line path; < 0 selects 6 ell
};

struct RadioRun {
  RadioProblem problem;
  std::vector<PosePlanar> truth;
  Eigen::VectorXd theta;
  std::vector<int> turn_steps;  // odometry indices t whose increment contains a turn
};

RadioRun gen_radio_square(const RadioScenario& cfg, const SeedStream& seeds);
RadioRun gen_radio_line(const RadioScenario& cfg, const SeedStream& seeds);
RadioRun gen_radio(const RadioScenario& cfg, const SeedStream& seeds);

// --- magnetic -----------------------------------------------------------------

struct MagneticScenario {
  KernelHyper hyper{200.0, 1.3, 650.0, 10.0};
  int truth_basis = 512;
  int basis = 64;               // estimator basis size
  int steps = 200;              // number of poses T
  double dt = 0.01;
  Eigen::Vector3d qp_diag{0.25, 0.25, 0.01};                  // [m^2/s]
  Eigen::Vector3d qq_diag_deg{0.01 * 0.01, 0.01 * 0.01, 0.09};  // [deg^2/s]
  double semi_major = 2.0;
  double semi_minor = 1.5;
  double laps = 1.2;
  double z_amplitude = 0.1;
  double tilt_amplitude_deg = 5.0;
  double bias = 0.0;            // constant body-frame y-axis magnetometer offset
};

struct MagneticRun {
  MagneticProblem problem;
  std::vector<Pose3D> truth;
  Eigen::VectorXd theta_truth;  // over the truth basis
  BasisDomain truth_domain;
};

MagneticRun gen_magnetic(const MagneticScenario& cfg, const SeedStream& seeds);

// --- visual -------------------------------------------------------------------

struct VisualScenario {
  Camera2D camera{};
  int landmarks = 20;
  double sigma_v2 = 0.01;
  int steps = 197;
  double dt = 1.0;
  double radius = 3.0;
  double loops = 2.0;
  double landmark_radius_min = 6.0;
  double landmark_radius_max = 9.0;
  double drift = 0.01;          // [m/s] along navigation x
  double qp = 0.04 * 0.04;      // [m^2/s] per axis
  double qq = 1e-12;            // [rad^2/s]
  double init_var = 0.0;        // landmark initialization noise sigma^2
  double prior_var = 16.0;      // landmark prior variance per axis
};

struct VisualRun {
  VisualProblem problem;
  std::vector<PosePlanar> truth;
  Eigen::VectorXd landmarks;  // true theta
};

VisualRun gen_visual2d(const VisualScenario& cfg, const SeedStream& seeds);

}  // namespace rbslam

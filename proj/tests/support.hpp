#pragma once

// Small fixtures shared by the unit tests.

#include <random>
#include <vector>

#include <Eigen/Core>

#include "rbslam/geometry.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/inference.hpp"
#include "rbslam/rng.hpp"
#include "rbslam/sensors.hpp"
#include "rbslam/simulation.hpp"

namespace rbslam::testing {

inline Eigen::VectorXd randn(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j) A.col(j) = randn(n, rng);
  return A * A.transpose() / static_cast<double>(n) + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

inline BasisDomain square_domain(double half, int m) {
  return make_basis_domain(Eigen::Vector2d(-half, -half), Eigen::Vector2d(half, half), m);
}

/// Straight planar walk through a random radio field. Position noise `qp`
/// and heading noise `qq` per step; zero noise gives a deterministic problem.
struct RadioToy {
  RadioProblem prob;
  std::vector<PosePlanar> truth;
  Eigen::VectorXd theta;
};

inline RadioToy radio_toy(std::uint64_t seed, int T, double qp, double qq, int m = 16, double sigma2 = 0.05) {
  Rng rng = SeedStream(seed).engine();
  const KernelHyper hyper{2.0, 0.5, 0.0, sigma2};
  const BasisDomain dom = square_domain(2.5, m);
  RadioToy toy;
  toy.prob.dynamics = PlanarDynamics(IncrementFrame::body);
  toy.prob.sensor = RadioSensor(dom, hyper);
  toy.prob.prior = prior_belief(dom, hyper, MapKind::radio);
  toy.prob.x0 = PosePlanar(Eigen::Vector2d(-1.5, -0.2), 0.0);
  toy.theta = sample_map_from_prior(dom, hyper, MapKind::radio, rng);
  PlanarOdometry odo;
  odo.increment.dp = Eigen::Vector2d(3.0 / T, 0.0);
  odo.increment.dq = 0.02;
  odo.noise.Qp = qp * Eigen::Matrix2d::Identity();
  odo.noise.Qq = qq;
  PosePlanar p = toy.prob.x0;
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      p = toy.prob.dynamics.propagate(p, odo, rng);
      toy.prob.odometry.push_back(odo);
    }
    toy.truth.push_back(p);
    toy.prob.measurements.push_back(toy.prob.sensor.simulate(p, toy.theta, rng));
  }
  return toy;
}

}  // namespace rbslam::testing

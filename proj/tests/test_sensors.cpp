#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rbslam/oracles.hpp"
#include "rbslam/sensors.hpp"
#include "support.hpp"

namespace rbslam {
namespace {

using testing::randn;

RadioSensor radio(int channels = 1) {
  return RadioSensor(testing::square_domain(2.0, 24), KernelHyper{2.0, 0.5, 0.0, 0.01}, channels);
}

MagneticSensor magnetic() {
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-3, -3, -1), Eigen::Vector3d(3, 3, 1.5), 48);
  return MagneticSensor(d, KernelHyper{200.0, 1.3, 650.0, 10.0});
}

TEST(RadioSensor, BoundaryGivesZeroRow) {
  const RadioSensor s = radio();
  EXPECT_TRUE(s.C(PosePlanar({2.0, 0.3}, 0.0)).isZero(1e-14));
  EXPECT_TRUE(s.C(PosePlanar({0.1, -2.0}, 1.0)).isZero(1e-14));
}

TEST(RadioSensor, ChannelsAreBlockDiagonal) {
  const RadioSensor s = radio(3);
  const PosePlanar p({0.2, 0.4}, 0.0);
  const Eigen::MatrixXd C = s.C(p);
  ASSERT_EQ(C.rows(), 3);
  ASSERT_EQ(C.cols(), 72);
  const Eigen::VectorXd phi = eigenbasis_eval(s.domain(), p.position);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      const Eigen::RowVectorXd block = C.block(k, l * 24, 1, 24);
      if (k == l)
        EXPECT_EQ(block, phi.transpose());
      else
        EXPECT_TRUE(block.isZero(0.0));
    }
}

TEST(RadioSensor, NoiselessSimulationIsLinear) {
  RadioSensor s(testing::square_domain(2.0, 24), KernelHyper{2.0, 0.5, 0.0, 0.0});
  Rng rng = SeedStream(1).engine();
  const Eigen::VectorXd theta = randn(24, rng);
  const PosePlanar p({0.3, -0.7}, 0.4);
  EXPECT_EQ(s.simulate(p, theta, rng).values, s.C(p) * theta);
}

TEST(RadioSensor, PoseJacobianByFiniteDifference) {
  const RadioSensor s = radio(2);
  Rng rng = SeedStream(2).engine();
  const Eigen::VectorXd theta = randn(48, rng);
  const PosePlanar p({0.3, -0.7}, 0.4);
  const Linearization lin = s.linearize(p, theta, Measurement{Eigen::VectorXd::Zero(2), {}}, true);
  const Eigen::MatrixXd fd = oracle::central_difference(
      [&](const Eigen::VectorXd& d) { return Eigen::VectorXd(s.C(PlanarDynamics().boxplus(p, d)) * theta); },
      Eigen::Vector3d::Zero());
  EXPECT_LT((lin.pose_jacobian - fd).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RadioSensor, NoiseMoments) {
  const RadioSensor s = radio();
  Rng rng = SeedStream(3).engine();
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(24);
  const int n = 100000;
  double s2 = 0.0;
  for (int k = 0; k < n; ++k) s2 += std::pow(s.simulate(PosePlanar(), theta, rng).values[0], 2);
  EXPECT_NEAR(s2 / n, 0.01, 0.05 * 0.01);
}

TEST(MagneticSensor, LinearPartOnlyAtIdentity) {
  const MagneticSensor s = magnetic();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(s.state_dim());
  theta.head<3>() << 10.0, -20.0, 35.0;
  Pose3D p;
  p.position = Eigen::Vector3d(0.4, -0.3, 0.2);
  EXPECT_LT((s.C(p) * theta - theta.head<3>()).norm(), 1e-12);
}

TEST(MagneticSensor, BodyFrameRotation) {
  const MagneticSensor s = magnetic();
  Pose3D a;
  a.position = Eigen::Vector3d(0.1, 0.5, 0.0);
  Pose3D b = a;
  b.orientation = quat_exp(Eigen::Vector3d(0.2, -0.4, 1.1));
  EXPECT_LT((s.C(b) - quat_to_rotmat(b.orientation).transpose() * s.C(a)).cwiseAbs().maxCoeff(), 1e-12);
}

// The navigation-frame field is a gradient, so its spatial Jacobian is symmetric.
TEST(MagneticSensor, FieldIsCurlFree) {
  const MagneticSensor s = magnetic();
  Rng rng = SeedStream(5).engine();
  const Eigen::VectorXd theta = randn(s.state_dim(), rng);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Vector3d p0 = 0.5 * randn(3, rng);
    auto field = [&](const Eigen::VectorXd& x) {
      Pose3D p;
      p.position = x;
      return Eigen::VectorXd(s.C(p) * theta);
    };
    const Eigen::MatrixXd J = oracle::central_difference(field, p0, 1e-5);
    EXPECT_LT((J - J.transpose()).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, J.cwiseAbs().maxCoeff()));
  }
}

TEST(MagneticSensor, PoseJacobianByFiniteDifference) {
  const MagneticSensor s = magnetic();
  Rng rng = SeedStream(6).engine();
  const Eigen::VectorXd theta = randn(s.state_dim(), rng);
  Pose3D p;
  p.position = Eigen::Vector3d(0.3, -0.2, 0.4);
  p.orientation = quat_exp(Eigen::Vector3d(0.1, 0.2, -0.7));
  const Pose3DDynamics dyn;
  const Linearization lin = s.linearize(p, theta, Measurement{Eigen::VectorXd::Zero(3), {}}, true);
  const Eigen::MatrixXd fd = oracle::central_difference(
      [&](const Eigen::VectorXd& d) { return Eigen::VectorXd(s.C(dyn.boxplus(p, d)) * theta); },
      Eigen::VectorXd::Zero(6));
  EXPECT_LT((lin.pose_jacobian - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
}

TEST(MagneticSensor, NoiseCovariance) {
  const MagneticSensor s = magnetic();
  Rng rng = SeedStream(7).engine();
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(s.state_dim());
  const int n = 100000;
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector3d y = s.simulate(Pose3D{}, theta, rng).values;
    S += y * y.transpose();
  }
  S /= n;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(S(i, i), 10.0, 0.5);
  EXPECT_LT(std::abs(S(0, 1)), 0.3);
}

TEST(Visual2d, OpticalAxisProjectsToCenter) {
  const Camera2D cam;
  // Camera looks along its second axis; heading 0 means the optical axis is world y.
  const Projection p = visual2d_project(cam, PosePlanar(), Eigen::Vector2d(0.0, 3.0));
  EXPECT_TRUE(p.visible);
  EXPECT_DOUBLE_EQ(p.pixel, 0.0);
  EXPECT_DOUBLE_EQ(p.depth, 3.0);
}

TEST(Visual2d, DirectRatio) {
  const Projection p = visual2d_project(Camera2D{}, PosePlanar(), Eigen::Vector2d(1.0, 1.5));
  EXPECT_TRUE(p.visible);
  EXPECT_NEAR(p.pixel, 1.0, 1e-15);
}

TEST(Visual2d, FieldOfView) {
  const Camera2D cam;
  EXPECT_NEAR(2.0 * cam.effective_half_fov() * 180.0 / std::numbers::pi, 67.38, 0.01);
  EXPECT_FALSE(visual2d_project(cam, PosePlanar(), Eigen::Vector2d(2.0, 1.5)).visible);
  EXPECT_FALSE(visual2d_project(cam, PosePlanar(), Eigen::Vector2d(0.0, 0.05)).visible);
  EXPECT_FALSE(visual2d_project(cam, PosePlanar(), Eigen::Vector2d(0.0, -3.0)).visible);
}

struct VisualFixture {
  Visual2dSensor sensor{Camera2D{}, 4, 0.01};
  Eigen::VectorXd theta = (Eigen::VectorXd(8) << -1.0, 4.0, 0.5, 3.0, 2.0, 6.0, 0.0, -5.0).finished();
  PosePlanar pose{Eigen::Vector2d(0.1, -0.2), 0.05};
};

TEST(Visual2d, LinearizationJacobianByFiniteDifference) {
  VisualFixture f;
  Rng rng = SeedStream(8).engine();
  const Measurement y = Visual2dSensor(f.sensor.camera(), 4, 0.0).simulate(f.pose, f.theta, rng);
  ASSERT_EQ(y.ids.size(), 3u);
  const Linearization lin = f.sensor.linearize(f.pose, f.theta, y, true);
  auto pixels = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd out(y.ids.size());
    for (std::size_t k = 0; k < y.ids.size(); ++k)
      out[k] = visual2d_project(f.sensor.camera(), f.pose, th.segment<2>(2 * y.ids[k])).pixel;
    return out;
  };
  const Eigen::MatrixXd fd = oracle::central_difference(pixels, f.theta);
  EXPECT_LT((lin.C - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
  // Landmark 3 is behind the camera and contributes no columns.
  EXPECT_TRUE(lin.C.middleCols(6, 2).isZero(0.0));
  // Pose Jacobian.
  const Eigen::MatrixXd fdp = oracle::central_difference(
      [&](const Eigen::VectorXd& d) {
        const PosePlanar q = PlanarDynamics().boxplus(f.pose, d);
        Eigen::VectorXd out(y.ids.size());
        for (std::size_t k = 0; k < y.ids.size(); ++k)
          out[k] = visual2d_project(f.sensor.camera(), q, f.theta.segment<2>(2 * y.ids[k])).pixel;
        return out;
      },
      Eigen::Vector3d::Zero());
  EXPECT_LT((lin.pose_jacobian - fdp).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, fdp.cwiseAbs().maxCoeff()));
}

TEST(Visual2d, DoublingFocalLengthDoublesJacobian) {
  VisualFixture f;
  Rng rng = SeedStream(9).engine();
  const Measurement y = f.sensor.simulate(f.pose, f.theta, rng);
  Camera2D wide;
  wide.f = 3.0;
  wide.half_fov = f.sensor.camera().effective_half_fov();
  const Visual2dSensor s2(wide, 4, 0.01);
  EXPECT_LT((s2.linearize(f.pose, f.theta, y).C - 2.0 * f.sensor.linearize(f.pose, f.theta, y).C).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Visual2d, ZeroNoiseSimulationIsExactProjection) {
  VisualFixture f;
  const Visual2dSensor exact(f.sensor.camera(), 4, 0.0);
  Rng rng = SeedStream(10).engine();
  const Measurement y = exact.simulate(f.pose, f.theta, rng);
  for (std::size_t k = 0; k < y.ids.size(); ++k)
    EXPECT_DOUBLE_EQ(y.values[k], visual2d_project(f.sensor.camera(), f.pose, f.theta.segment<2>(2 * y.ids[k])).pixel);
  // Linearized at a perturbed mean, the prediction differs from the simulated pixel.
  Eigen::VectorXd off = f.theta;
  off.segment<2>(2) += Eigen::Vector2d(0.3, -0.2);
  const Linearization lin = f.sensor.linearize(f.pose, off, y);
  const Eigen::VectorXd lin_pred = lin.predicted + lin.C * (f.theta - off);
  EXPECT_GT((lin_pred - y.values).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Visual2d, LinearizationErrorIsQuadratic) {
  VisualFixture f;
  const Visual2dSensor exact(f.sensor.camera(), 4, 0.0);
  Rng rng = SeedStream(11).engine();
  const Measurement y = exact.simulate(f.pose, f.theta, rng);
  const Eigen::VectorXd dir = randn(8, rng).normalized();
  double prev = 0.0;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    const Eigen::VectorXd mu = f.theta + eps * dir;
    const Linearization lin = f.sensor.linearize(f.pose, mu, y);
    const double err = (lin.predicted + lin.C * (f.theta - mu) - lin.observed).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.6);
    prev = err;
  }
}

TEST(Visual2d, DegenerateDepthIsDropped) {
  VisualFixture f;
  Measurement y;
  y.ids = {0, 1};
  y.values = Eigen::Vector2d(0.1, 0.2);
  Eigen::VectorXd mu = f.theta;
  mu.segment<2>(0) = f.pose.position;  // landmark 0 at the camera centre
  const Linearization lin = f.sensor.linearize(f.pose, mu, y);
  EXPECT_EQ(lin.rows(), 1);
  EXPECT_EQ(lin.dropped, 1);
}

TEST(Visual2d, DirectInformationMatchesLinearization) {
  VisualFixture f;
  Rng rng = SeedStream(12).engine();
  const Measurement y = f.sensor.simulate(f.pose, f.theta, rng);
  Eigen::VectorXd mu = f.theta + 0.1 * randn(8, rng);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(8, 8);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(8);
  double q = 0, logdet = 0, ub = 0;
  Eigen::Index rows = 0;
  f.sensor.accumulate_information(f.pose, mu, y, A, z, q, rows, logdet, ub);
  const Linearization lin = f.sensor.linearize(f.pose, mu, y);
  const Eigen::MatrixXd Si = lin.noise.inverse();
  EXPECT_EQ(rows, lin.rows());
  EXPECT_LT((A - lin.C.transpose() * Si * lin.C).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((z - lin.C.transpose() * Si * lin.residual()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(q, lin.residual().dot(Si * lin.residual()), 1e-10);
}

TEST(Sensors, PureFunctionsOfInputs) {
  const MagneticSensor s = magnetic();
  Pose3D p;
  p.position = Eigen::Vector3d(0.2, 0.1, 0.3);
  EXPECT_EQ(s.C(p), s.C(p));
  const RadioSensor r = radio();
  EXPECT_EQ(r.C(PosePlanar({0.1, 0.2}, 0)), r.C(PosePlanar({0.1, 0.2}, 0)));
}

}  // namespace
}  // namespace rbslam

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rbslam/rng.hpp"

namespace rbslam {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Eigen::Matrix2d rot2(double angle);
/// d/da of rot2(a).
Eigen::Matrix2d rot2_derivative(double angle);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Rotation-vector exponential with the half-angle convention: the scalar part
/// is cos(|v|/2), so `v` is an axis-angle rotation in radians.
Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v);
/// Inverse of quat_exp on the shortest-rotation branch (|result| <= pi).
Eigen::Vector3d quat_log(const Eigen::Quaterniond& q);
/// Throws InvalidQuaternion when |q| deviates from 1 by more than 1e-6.
Eigen::Matrix3d quat_to_rotmat(const Eigen::Quaterniond& q);

// ---------------------------------------------------------------------------
// Planar pose and the odometry-driven dynamics
//   p' = p + R(h) dp + e_p   (body-frame increments)
//   p' = p + dp + e_p        (navigation-frame increments)
//   h' = h + dq + w,  w ~ N(0, dt Qq),  e_p ~ N(0, dt Qp)
// ---------------------------------------------------------------------------

struct PosePlanar {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;  // wrapped to (-pi, pi]

  PosePlanar() = default;
  PosePlanar(Eigen::Vector2d p, double h) : position(std::move(p)), heading(wrap_angle(h)) {}
};

struct PlanarIncrement {
  Eigen::Vector2d dp = Eigen::Vector2d::Zero();
  double dq = 0.0;
};

struct ProcessNoisePlanar {
  Eigen::Matrix2d Qp = Eigen::Matrix2d::Zero();
  double Qq = 0.0;
  double dt = 1.0;
};

/// One odometry sample together with the noise level valid for that step.
struct PlanarOdometry {
  PlanarIncrement increment;
  ProcessNoisePlanar noise;
};

enum class IncrementFrame { body, navigation };

PosePlanar propagate_planar(const PosePlanar& pose, const PlanarOdometry& odo, IncrementFrame frame,
                            Rng& rng);
PosePlanar propagate_planar_mean(const PosePlanar& pose, const PlanarOdometry& odo,
                                 IncrementFrame frame);

// ---------------------------------------------------------------------------
// 3D pose
//   p' = p + dp + e_p,           e_p ~ N(0, dt Qp)
//   q' = q * dq * exp_q(e_q),    e_q ~ N(0, dt Qq)
// ---------------------------------------------------------------------------

struct Pose3D {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // q^nb
};

struct Increment3D {
  Eigen::Vector3d dp = Eigen::Vector3d::Zero();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
};

struct ProcessNoise3D {
  Eigen::Matrix3d Qp = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d Qq = Eigen::Matrix3d::Zero();
  double dt = 1.0;
};

struct Odometry3D {
  Increment3D increment;
  ProcessNoise3D noise;
};

Pose3D propagate_3d(const Pose3D& pose, const Odometry3D& odo, Rng& rng);
Pose3D propagate_3d_mean(const Pose3D& pose, const Odometry3D& odo);

/// Zero-mean Gaussian sample with covariance `cov` (PSD; zero directions stay zero).
Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng);

/// Log density of a zero-mean Gaussian with a possibly singular covariance.
/// Directions with zero variance act as a Dirac: the residual projected onto
/// them must vanish to within 1e-9, otherwise the result is -inf.
double log_gaussian_dirac(const Eigen::VectorXd& residual, const Eigen::MatrixXd& cov);

// ---------------------------------------------------------------------------
// Dynamics models used by the filters. Each exposes sampling, the transition
// density and the error-state linearization used by the EKF baselines.
// ---------------------------------------------------------------------------

class PlanarDynamics {
 public:
  using Pose = PosePlanar;
  using Odometry = PlanarOdometry;
  static constexpr int kErrorDim = 3;   // [px, py, heading]
  static constexpr int kSpatialDim = 2;

  explicit PlanarDynamics(IncrementFrame frame = IncrementFrame::body) : frame_(frame) {}

  IncrementFrame frame() const { return frame_; }

  Pose propagate(const Pose& pose, const Odometry& odo, Rng& rng) const {
    return propagate_planar(pose, odo, frame_, rng);
  }
  Pose propagate_mean(const Pose& pose, const Odometry& odo) const {
    return propagate_planar_mean(pose, odo, frame_);
  }
  double log_transition(const Pose& from, const Odometry& odo, const Pose& to) const;

  Eigen::Matrix3d jacobian(const Pose& pose, const Odometry& odo) const;
  Eigen::Matrix3d noise_cov(const Pose& pose, const Odometry& odo) const;
  Pose boxplus(const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& delta) const;
  Eigen::Vector3d boxminus(const Pose& a, const Pose& b) const;

  static Eigen::VectorXd position(const Pose& pose) { return pose.position; }
  static double yaw(const Pose& pose) { return pose.heading; }

 private:
  IncrementFrame frame_;
};

class Pose3DDynamics {
 public:
  using Pose = Pose3D;
  using Odometry = Odometry3D;
  static constexpr int kErrorDim = 6;   // [dp (nav), dphi (body, right-multiplicative)]
  static constexpr int kSpatialDim = 3;

  Pose propagate(const Pose& pose, const Odometry& odo, Rng& rng) const {
    return propagate_3d(pose, odo, rng);
  }
  Pose propagate_mean(const Pose& pose, const Odometry& odo) const {
    return propagate_3d_mean(pose, odo);
  }
  double log_transition(const Pose& from, const Odometry& odo, const Pose& to) const;

  Eigen::Matrix<double, 6, 6> jacobian(const Pose& pose, const Odometry& odo) const;
  Eigen::Matrix<double, 6, 6> noise_cov(const Pose& pose, const Odometry& odo) const;
  Pose boxplus(const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& delta) const;
  Eigen::Matrix<double, 6, 1> boxminus(const Pose& a, const Pose& b) const;

  static Eigen::VectorXd position(const Pose& pose) { return pose.position; }
  static double yaw(const Pose& pose);
};

}  // namespace rbslam

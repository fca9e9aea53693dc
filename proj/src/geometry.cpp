#include "rbslam/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "rbslam/errors.hpp"

namespace rbslam {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

Eigen::Matrix2d rot2(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix2d rot2_derivative(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << -s, -c, c, -s;
  return r;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Eigen::Quaterniond quat_exp(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle == 0.0) return Eigen::Quaterniond::Identity();
  const double half = 0.5 * angle;
  const Eigen::Vector3d axis = v / angle;
  const double s = std::sin(half);
  return Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

Eigen::Vector3d quat_log(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d vec = q.vec();
  const double vn = vec.norm();
  if (vn < 1e-12) return 2.0 * vec / q.w();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return angle * vec / vn;
}

Eigen::Matrix3d quat_to_rotmat(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6)
    throw InvalidQuaternion("quaternion norm " + std::to_string(n) + " is not 1");
  return q.toRotationMatrix();
}

Eigen::VectorXd sample_gaussian(const Eigen::MatrixXd& cov, Rng& rng) {
  std::normal_distribution<double> normal;
  const Eigen::Index n = cov.rows();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  if (cov.isDiagonal()) return cov.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
}

double log_gaussian_dirac(const Eigen::VectorXd& r, const Eigen::MatrixXd& cov) {
  constexpr double kLog2Pi = 1.8378770664093453;
  constexpr double kDiracTol = 1e-9;
  constexpr double kZeroVar = 1e-30;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (cov.isDiagonal()) {
    double lp = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double v = cov(i, i);
      if (v <= kZeroVar) {
        if (std::abs(r[i]) > kDiracTol) return kNegInf;
        continue;
      }
      lp += -0.5 * (kLog2Pi + std::log(v) + r[i] * r[i] / v);
    }
    return lp;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * r;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double v = es.eigenvalues()[i];
    if (v <= kZeroVar) {
      if (std::abs(proj[i]) > kDiracTol) return kNegInf;
      continue;
    }
    lp += -0.5 * (kLog2Pi + std::log(v) + proj[i] * proj[i] / v);
  }
  return lp;
}

// --- planar -----------------------------------------------------------------

PosePlanar propagate_planar_mean(const PosePlanar& pose, const PlanarOdometry& odo,
                                 IncrementFrame frame) {
  PosePlanar out;
  out.position = frame == IncrementFrame::body
                     ? Eigen::Vector2d(pose.position + rot2(pose.heading) * odo.increment.dp)
                     : Eigen::Vector2d(pose.position + odo.increment.dp);
  out.heading = wrap_angle(pose.heading + odo.increment.dq);
  return out;
}

PosePlanar propagate_planar(const PosePlanar& pose, const PlanarOdometry& odo, IncrementFrame frame,
                            Rng& rng) {
  PosePlanar out = propagate_planar_mean(pose, odo, frame);
  const double dt = odo.noise.dt;
  if (!odo.noise.Qp.isZero(0.0)) out.position += sample_gaussian(dt * odo.noise.Qp, rng);
  if (odo.noise.Qq > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(dt * odo.noise.Qq));
    // heading noise is added before wrapping
    out.heading = wrap_angle(pose.heading + odo.increment.dq + normal(rng));
  }
  return out;
}

double PlanarDynamics::log_transition(const Pose& from, const Odometry& odo, const Pose& to) const {
  const PosePlanar mean = propagate_mean(from, odo);
  const double dt = odo.noise.dt;
  const Eigen::VectorXd rp = to.position - mean.position;
  const double lp = log_gaussian_dirac(rp, dt * odo.noise.Qp);
  if (!std::isfinite(lp)) return lp;
  Eigen::VectorXd rh(1);
  rh[0] = wrap_angle(to.heading - mean.heading);
  Eigen::MatrixXd qh(1, 1);
  qh(0, 0) = dt * odo.noise.Qq;
  return lp + log_gaussian_dirac(rh, qh);
}

Eigen::Matrix3d PlanarDynamics::jacobian(const Pose& pose, const Odometry& odo) const {
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  if (frame_ == IncrementFrame::body) f.block<2, 1>(0, 2) = rot2_derivative(pose.heading) * odo.increment.dp;
  return f;
}

Eigen::Matrix3d PlanarDynamics::noise_cov(const Pose&, const Odometry& odo) const {
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q.topLeftCorner<2, 2>() = odo.noise.dt * odo.noise.Qp;
  q(2, 2) = odo.noise.dt * odo.noise.Qq;
  return q;
}

PosePlanar PlanarDynamics::boxplus(const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& d) const {
  return PosePlanar(pose.position + d.head<2>(), pose.heading + d[2]);
}

Eigen::Vector3d PlanarDynamics::boxminus(const Pose& a, const Pose& b) const {
  Eigen::Vector3d d;
  d.head<2>() = a.position - b.position;
  d[2] = wrap_angle(a.heading - b.heading);
  return d;
}

// --- 3D -----------------------------------------------------------------------

Pose3D propagate_3d_mean(const Pose3D& pose, const Odometry3D& odo) {
  Pose3D out;
  out.position = pose.position + odo.increment.dp;
  out.orientation = (pose.orientation * odo.increment.dq).normalized();
  return out;
}

Pose3D propagate_3d(const Pose3D& pose, const Odometry3D& odo, Rng& rng) {
  Pose3D out;
  const double dt = odo.noise.dt;
  out.position = pose.position + odo.increment.dp;
  if (!odo.noise.Qp.isZero(0.0)) out.position += sample_gaussian(dt * odo.noise.Qp, rng);
  Eigen::Quaterniond q = pose.orientation * odo.increment.dq;
  if (!odo.noise.Qq.isZero(0.0)) {
    const Eigen::Vector3d e = sample_gaussian(dt * odo.noise.Qq, rng);
    q = q * quat_exp(e);
  }
  out.orientation = q.normalized();
  return out;
}

double Pose3DDynamics::log_transition(const Pose& from, const Odometry& odo, const Pose& to) const {
  const double dt = odo.noise.dt;
  const Eigen::VectorXd rp = to.position - from.position - odo.increment.dp;
  const double lp = log_gaussian_dirac(rp, dt * odo.noise.Qp);
  if (!std::isfinite(lp)) return lp;
  const Eigen::Quaterniond pred = from.orientation * odo.increment.dq;
  const Eigen::VectorXd rq = quat_log(pred.conjugate() * to.orientation);
  return lp + log_gaussian_dirac(rq, dt * odo.noise.Qq);
}

Eigen::Matrix<double, 6, 6> Pose3DDynamics::jacobian(const Pose&, const Odometry& odo) const {
  Eigen::Matrix<double, 6, 6> f = Eigen::Matrix<double, 6, 6>::Identity();
  f.bottomRightCorner<3, 3>() = quat_to_rotmat(odo.increment.dq.normalized()).transpose();
  return f;
}

Eigen::Matrix<double, 6, 6> Pose3DDynamics::noise_cov(const Pose&, const Odometry& odo) const {
  Eigen::Matrix<double, 6, 6> q = Eigen::Matrix<double, 6, 6>::Zero();
  q.topLeftCorner<3, 3>() = odo.noise.dt * odo.noise.Qp;
  q.bottomRightCorner<3, 3>() = odo.noise.dt * odo.noise.Qq;
  return q;
}

Pose3D Pose3DDynamics::boxplus(const Pose& pose, const Eigen::Ref<const Eigen::VectorXd>& d) const {
  Pose3D out;
  out.position = pose.position + d.head<3>();
  out.orientation = (pose.orientation * quat_exp(d.segment<3>(3))).normalized();
  return out;
}

Eigen::Matrix<double, 6, 1> Pose3DDynamics::boxminus(const Pose& a, const Pose& b) const {
  Eigen::Matrix<double, 6, 1> d;
  d.head<3>() = a.position - b.position;
  d.tail<3>() = quat_log(b.orientation.conjugate() * a.orientation);
  return d;
}

double Pose3DDynamics::yaw(const Pose& pose) {
  const Eigen::Matrix3d r = pose.orientation.normalized().toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

}  // namespace rbslam

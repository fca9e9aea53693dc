#include "rbslam/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rbslam {

namespace {

Eigen::VectorXd gaussian_noise(Eigen::Index n, double var, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(var));
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = var > 0.0 ? normal(rng) : 0.0;
  return e;
}

}  // namespace

// --- radio --------------------------------------------------------------------

Eigen::MatrixXd RadioSensor::C(const PosePlanar& pose) const {
  const int m = domain_.size();
  const Eigen::VectorXd phi = eigenbasis_eval(domain_, pose.position);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(channels_, m * channels_);
  for (int k = 0; k < channels_; ++k) c.block(k, k * m, 1, m) = phi.transpose();
  return c;
}

Eigen::MatrixXd RadioSensor::noise_cov() const {
  return hyper_.sigma_noise2 * Eigen::MatrixXd::Identity(channels_, channels_);
}

Linearization RadioSensor::linearize(const PosePlanar& pose, const Eigen::VectorXd& theta, const Measurement& y,
                                     bool with_pose_jacobian) const {
  Linearization lin;
  lin.C = C(pose);
  lin.predicted = lin.C * theta;
  lin.observed = y.values;
  lin.noise = noise_cov();
  if (with_pose_jacobian) {
    const int m = domain_.size();
    const Eigen::MatrixXd g = eigenbasis_grad(domain_, pose.position);  // m x 2
    lin.pose_jacobian = Eigen::MatrixXd::Zero(channels_, 3);
    for (int k = 0; k < channels_; ++k)
      lin.pose_jacobian.block(k, 0, 1, 2) = (g.transpose() * theta.segment(k * m, m)).transpose();
  }
  return lin;
}

Measurement RadioSensor::simulate(const PosePlanar& pose, const Eigen::VectorXd& theta, Rng& rng) const {
  Measurement y;
  y.values = C(pose) * theta + gaussian_noise(channels_, hyper_.sigma_noise2, rng);
  return y;
}

// --- magnetic -----------------------------------------------------------------

Eigen::MatrixXd MagneticSensor::C(const Pose3D& pose) const {
  const int m = domain_.size();
  const Eigen::Matrix3d Rnb = quat_to_rotmat(pose.orientation);
  Eigen::MatrixXd c(3, m + 3);
  c.leftCols<3>() = Rnb.transpose();
  c.rightCols(m).noalias() = Rnb.transpose() * eigenbasis_grad(domain_, pose.position).transpose();
  return c;
}

Linearization MagneticSensor::linearize(const Pose3D& pose, const Eigen::VectorXd& theta, const Measurement& y,
                                        bool with_pose_jacobian) const {
  Linearization lin;
  lin.C = C(pose);
  lin.predicted = lin.C * theta;
  lin.observed = y.values;
  lin.noise = noise_cov();
  if (with_pose_jacobian) {
    const int m = domain_.size();
    const Eigen::Matrix3d Rnb = quat_to_rotmat(pose.orientation);
    const Eigen::Vector3d yb = lin.predicted;
    lin.pose_jacobian.resize(3, 6);
    lin.pose_jacobian.leftCols<3>() =
        Rnb.transpose() * eigenbasis_hessian_sum(domain_, pose.position, theta.tail(m));
    lin.pose_jacobian.rightCols<3>() = skew(yb);
  }
  return lin;
}

Measurement MagneticSensor::simulate(const Pose3D& pose, const Eigen::VectorXd& theta, Rng& rng) const {
  Measurement y;
  y.values = C(pose) * theta + gaussian_noise(3, hyper_.sigma_noise2, rng);
  return y;
}

// --- visual -------------------------------------------------------------------

double Camera2D::effective_half_fov() const { return half_fov > 0.0 ? half_fov : std::atan(1.0 / f); }

Projection visual2d_project(const Camera2D& cam, const PosePlanar& pose, const Eigen::Vector2d& landmark) {
  const Eigen::Vector2d cc = rot2(pose.heading).transpose() * (landmark - pose.position);
  Projection p;
  p.depth = cc.y();
  if (p.depth <= cam.depth_min) return p;
  p.pixel = cam.f * cc.x() / cc.y() + cam.c;
  p.visible = std::abs(p.pixel - cam.c) <= cam.f * std::tan(cam.effective_half_fov());
  return p;
}

Linearization Visual2dSensor::linearize(const PosePlanar& pose, const Eigen::VectorXd& theta, const Measurement& y,
                                        bool with_pose_jacobian) const {
  const Eigen::Matrix2d Rt = rot2(pose.heading).transpose();
  const Eigen::Matrix2d dRt = rot2_derivative(pose.heading).transpose();
  std::vector<int> keep;
  keep.reserve(y.ids.size());
  std::vector<Eigen::RowVector2d> d_landmark, d_position;
  std::vector<double> d_heading, pred;
  for (std::size_t k = 0; k < y.ids.size(); ++k) {
    const int j = y.ids[k];
    const Eigen::Vector2d rel = theta.segment<2>(2 * j) - pose.position;
    const Eigen::Vector2d cc = Rt * rel;
    if (cc.y() <= camera_.depth_min) continue;
    const Eigen::RowVector2d dpix_dc(camera_.f / cc.y(), -camera_.f * cc.x() / (cc.y() * cc.y()));
    keep.push_back(static_cast<int>(k));
    pred.push_back(camera_.f * cc.x() / cc.y() + camera_.c);
    d_landmark.push_back(dpix_dc * Rt);
    d_position.push_back(-dpix_dc * Rt);
    d_heading.push_back(dpix_dc * (dRt * rel));
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(keep.size());
  Linearization lin;
  lin.dropped = static_cast<int>(y.ids.size()) - static_cast<int>(rows);
  lin.C = Eigen::MatrixXd::Zero(rows, state_dim());
  lin.predicted.resize(rows);
  lin.observed.resize(rows);
  lin.noise = sigma_v2_ * Eigen::MatrixXd::Identity(rows, rows);
  if (with_pose_jacobian) lin.pose_jacobian.resize(rows, 3);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int j = y.ids[keep[r]];
    lin.C.block<1, 2>(r, 2 * j) = d_landmark[r];
    lin.columns.push_back(2 * j);
    lin.columns.push_back(2 * j + 1);
    lin.predicted[r] = pred[r];
    lin.observed[r] = y.values[keep[r]];
    if (with_pose_jacobian) {
      lin.pose_jacobian.block<1, 2>(r, 0) = d_position[r];
      lin.pose_jacobian(r, 2) = d_heading[r];
    }
  }
  return lin;
}

void Visual2dSensor::accumulate_information(const PosePlanar& pose, const Eigen::VectorXd& theta,
                                            const Measurement& y, Eigen::MatrixXd& A, Eigen::VectorXd& z, double& q,
                                            Eigen::Index& rows, double& logdet_sigma, double& upper_bound) const {
  const Eigen::Matrix2d Rt = rot2(pose.heading).transpose();
  const double inv = 1.0 / sigma_v2_;
  const double row_logdet = std::log(sigma_v2_);
  const double row_bound = std::max(0.0, -0.5 * (std::log(2.0 * std::numbers::pi) + row_logdet));
  for (std::size_t k = 0; k < y.ids.size(); ++k) {
    const int j = y.ids[k];
    const Eigen::Vector2d rel = theta.segment<2>(2 * j) - pose.position;
    const Eigen::Vector2d cc = Rt * rel;
    if (cc.y() <= camera_.depth_min) continue;
    const Eigen::RowVector2d dpix_dc(camera_.f / cc.y(), -camera_.f * cc.x() / (cc.y() * cc.y()));
    const Eigen::RowVector2d g = dpix_dc * Rt;
    const double r = y.values[k] - (camera_.f * cc.x() / cc.y() + camera_.c);
    A.block<2, 2>(2 * j, 2 * j).noalias() += inv * g.transpose() * g;
    z.segment<2>(2 * j) += (inv * r) * g.transpose();
    q += inv * r * r;
    ++rows;
    logdet_sigma += row_logdet;
    upper_bound += row_bound;
  }
}

Measurement Visual2dSensor::simulate(const PosePlanar& pose, const Eigen::VectorXd& theta, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_v2_));
  Measurement y;
  std::vector<double> vals;
  for (int j = 0; j < landmarks_; ++j) {
    const Projection p = visual2d_project(camera_, pose, theta.segment<2>(2 * j));
    if (!p.visible) continue;
    y.ids.push_back(j);
    vals.push_back(p.pixel + (sigma_v2_ > 0.0 ? normal(rng) : 0.0));
  }
  y.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return y;
}

}  // namespace rbslam

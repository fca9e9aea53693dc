#pragma once

#include <vector>

#include <Eigen/Core>

#include "rbslam/geometry.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/rng.hpp"

namespace rbslam {

/// One time step of sensor data. `ids` tags each entry of `values` with the
/// landmark it observes (visual only); dense map sensors leave it empty.
struct Measurement {
  Eigen::VectorXd values;
  std::vector<int> ids;
};

/// A conditionally linear(ized) observation y ~ N(C theta + (predicted - C theta_lin), noise).
/// For exactly linear sensors `predicted == C * theta_lin`.
struct Linearization {
  Eigen::MatrixXd C;              // rows x n_theta
  Eigen::VectorXd predicted;      // h(x, theta_lin)
  Eigen::VectorXd observed;       // measurement entries for the retained rows
  Eigen::MatrixXd noise;          // Sigma for the retained rows
  std::vector<int> columns;       // the only nonzero columns of C (empty: dense)
  Eigen::MatrixXd pose_jacobian;  // rows x pose error dim, filled on request
  int dropped = 0;                // rows dropped because the linearization point was degenerate

  Eigen::VectorXd residual() const { return observed - predicted; }
  Eigen::Index rows() const { return C.rows(); }
};

/// Dense RSSI map: y = Phi(p) theta + e, e ~ N(0, sigma_r^2 I), one map per channel.
class RadioSensor {
 public:
  static constexpr bool kConditionallyLinear = true;

  RadioSensor() = default;
  RadioSensor(BasisDomain domain, KernelHyper hyper, int channels = 1)
      : domain_(std::move(domain)), hyper_(hyper), channels_(channels) {}

  const BasisDomain& domain() const { return domain_; }
  const KernelHyper& hyper() const { return hyper_; }
  int channels() const { return channels_; }
  Eigen::Index state_dim() const { return static_cast<Eigen::Index>(domain_.size()) * channels_; }

  /// 1 x m row per channel (block diagonal across channels).
  Eigen::MatrixXd C(const PosePlanar& pose) const;
  Linearization linearize(const PosePlanar& pose, const Eigen::VectorXd& theta, const Measurement& y,
                          bool with_pose_jacobian = false) const;
  Measurement simulate(const PosePlanar& pose, const Eigen::VectorXd& theta, Rng& rng) const;
  Eigen::MatrixXd noise_cov() const;
  Eigen::MatrixXd noise_for(const Measurement&) const { return noise_cov(); }

 private:
  BasisDomain domain_;
  KernelHyper hyper_;
  int channels_ = 1;
};

/// Magnetic field as the gradient of a scalar potential with linear + SE kernel,
/// measured in the body frame: y = R(q^bn) [I_3 | grad Phi(p)^T] theta + e.
class MagneticSensor {
 public:
  static constexpr bool kConditionallyLinear = true;

  MagneticSensor() = default;
  MagneticSensor(BasisDomain domain, KernelHyper hyper) : domain_(std::move(domain)), hyper_(hyper) {}

  const BasisDomain& domain() const { return domain_; }
  const KernelHyper& hyper() const { return hyper_; }
  Eigen::Index state_dim() const { return domain_.size() + 3; }

  /// 3 x (m + 3).
  Eigen::MatrixXd C(const Pose3D& pose) const;
  Linearization linearize(const Pose3D& pose, const Eigen::VectorXd& theta, const Measurement& y,
                          bool with_pose_jacobian = false) const;
  Measurement simulate(const Pose3D& pose, const Eigen::VectorXd& theta, Rng& rng) const;
  Eigen::MatrixXd noise_cov() const { return hyper_.sigma_noise2 * Eigen::MatrixXd::Identity(3, 3); }
  Eigen::MatrixXd noise_for(const Measurement&) const { return noise_cov(); }

 private:
  BasisDomain domain_;
  KernelHyper hyper_;
};

/// 1D pinhole camera in the plane. Camera coordinates are c = R(h)^T (p_j - p);
/// the second coordinate is the optical axis.
struct Camera2D {
  double f = 1.5;
  double c = 0.0;
  double depth_min = 0.1;
  double half_fov = 0.0;  // 0 selects atan(1 / f)

  double effective_half_fov() const;
};

struct Projection {
  double pixel = 0.0;
  double depth = 0.0;
  bool visible = false;
};

Projection visual2d_project(const Camera2D& camera, const PosePlanar& pose, const Eigen::Vector2d& landmark);

/// Sparse landmark map theta = [p_1; ...; p_L], pixel = f c_1 / c_2 + c.
/// Conditionally approximately linear: C is the Jacobian of the projection with
/// respect to the landmark positions, taken at the supplied linearization mean.
class Visual2dSensor {
 public:
  static constexpr bool kConditionallyLinear = false;

  Visual2dSensor() = default;
  Visual2dSensor(Camera2D camera, int landmarks, double sigma_v2)
      : camera_(camera), landmarks_(landmarks), sigma_v2_(sigma_v2) {}

  const Camera2D& camera() const { return camera_; }
  int landmarks() const { return landmarks_; }
  double sigma_v2() const { return sigma_v2_; }
  Eigen::Index state_dim() const { return 2 * landmarks_; }
  Eigen::MatrixXd noise_for(const Measurement& y) const {
    const auto k = static_cast<Eigen::Index>(y.ids.size());
    return sigma_v2_ * Eigen::MatrixXd::Identity(k, k);
  }

  Linearization linearize(const PosePlanar& pose, const Eigen::VectorXd& theta, const Measurement& y,
                          bool with_pose_jacobian = false) const;
  /// Adds the information-form contribution of `y`, linearized at `theta`, to
  /// (A, z, q): the same sums build_future_info forms from linearize(), without
  /// materializing C. Rows are dropped under the same depth rule.
  void accumulate_information(const PosePlanar& pose, const Eigen::VectorXd& theta, const Measurement& y,
                              Eigen::MatrixXd& A, Eigen::VectorXd& z, double& q, Eigen::Index& rows,
                              double& logdet_sigma, double& upper_bound) const;
  /// Observes every landmark that is visible from `pose` under the true map.
  Measurement simulate(const PosePlanar& pose, const Eigen::VectorXd& theta, Rng& rng) const;

 private:
  Camera2D camera_;
  int landmarks_ = 0;
  double sigma_v2_ = 1.0;
};

}  // namespace rbslam

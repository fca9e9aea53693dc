#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rbslam/errors.hpp"
#include "rbslam/inference.hpp"

namespace rbslam {

/// Joint Gaussian over [pose error; theta] around a nominal pose.
template <class Pose>
struct AugmentedGaussianState {
  Pose pose;
  Eigen::VectorXd theta;
  Eigen::MatrixXd cov;  // (pose error dim + n_theta) square
};

template <class Pose>
struct EkfStep {
  AugmentedGaussianState<Pose> filtered;
  AugmentedGaussianState<Pose> predicted;  // prior at this step (equals filtered input at t = 0)
  Eigen::MatrixXd F;                       // augmented transition Jacobian from t - 1 (identity at t = 0)
};

template <class Pose>
struct EkfResult {
  std::vector<EkfStep<Pose>> steps;
  int dropped_rows = 0;
};

namespace detail {

inline void symmetrize(Eigen::MatrixXd& P) { P = 0.5 * (P + P.transpose()).eval(); }

}  // namespace detail

/// Error-state EKF-SLAM over the augmented state. The initial pose is known
/// (zero pose covariance); the map starts at the prior.
template <class Dyn, class Sensor>
EkfResult<typename Dyn::Pose> ekf_slam_run(const SlamProblem<Dyn, Sensor>& prob) {
  using Pose = typename Dyn::Pose;
  prob.validate();
  constexpr int d = Dyn::kErrorDim;
  const Eigen::Index n = prob.prior.dim();
  const Eigen::Index D = d + n;
  const int T = prob.steps();

  EkfResult<Pose> res;
  res.steps.resize(T);
  AugmentedGaussianState<Pose> s{prob.x0, prob.prior.mean, Eigen::MatrixXd::Zero(D, D)};
  s.cov.bottomRightCorner(n, n) = prob.prior.cov;

  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Identity(D, D);
    if (t > 0) {
      const auto& odo = prob.odometry[t - 1];
      const auto Fp = prob.dynamics.jacobian(s.pose, odo);
      const auto Q = prob.dynamics.noise_cov(s.pose, odo);
      F.topLeftCorner(d, d) = Fp;
      s.pose = prob.dynamics.propagate_mean(s.pose, odo);
      const Eigen::MatrixXd Pxx = s.cov.topLeftCorner(d, d);
      s.cov.topLeftCorner(d, d) = Fp * Pxx * Fp.transpose() + Q;
      const Eigen::MatrixXd Pxt = Fp * s.cov.topRightCorner(d, n);
      s.cov.topRightCorner(d, n) = Pxt;
      s.cov.bottomLeftCorner(n, d) = Pxt.transpose();
    }
    res.steps[t].predicted = s;
    res.steps[t].F = F;

    const Linearization lin = prob.sensor.linearize(s.pose, s.theta, prob.measurements[t], true);
    res.dropped_rows += lin.dropped;
    if (lin.rows() > 0) {
      Eigen::MatrixXd H(lin.rows(), D);
      H.leftCols(d) = lin.pose_jacobian;
      H.rightCols(n) = lin.C;
      const Eigen::MatrixXd PHt = s.cov * H.transpose();
      const Eigen::MatrixXd S = H * PHt + lin.noise;
      try {
        const auto llt = factor_innovation(S);
        const Eigen::MatrixXd W = llt.matrixL().solve(PHt.transpose()).transpose();  // P H^T L^-T
        const Eigen::VectorXd delta = W * llt.matrixL().solve(lin.residual());
        s.pose = prob.dynamics.boxplus(s.pose, delta.head(d));
        s.theta += delta.tail(n);
        s.cov.noalias() -= W * W.transpose();
        detail::symmetrize(s.cov);
      } catch (const SingularInnovation& e) {
        detail::rethrow_with_step(e, t + 1);
      }
    }
    res.steps[t].filtered = s;
  }
  return res;
}

/// Rauch-Tung-Striebel backward pass over a stored EKF history. Differences
/// between poses use the dynamics' boxminus, corrections its boxplus.
template <class Dyn, class Sensor>
std::vector<AugmentedGaussianState<typename Dyn::Pose>> eks_smooth(const SlamProblem<Dyn, Sensor>& prob,
                                                                   const EkfResult<typename Dyn::Pose>& ekf) {
  using Pose = typename Dyn::Pose;
  constexpr int d = Dyn::kErrorDim;
  const int T = static_cast<int>(ekf.steps.size());
  std::vector<AugmentedGaussianState<Pose>> out(T);
  if (T == 0) return out;
  out[T - 1] = ekf.steps[T - 1].filtered;
  for (int t = T - 2; t >= 0; --t) {
    const auto& f = ekf.steps[t].filtered;
    const auto& p = ekf.steps[t + 1].predicted;
    const auto& s1 = out[t + 1];
    const Eigen::MatrixXd& F = ekf.steps[t + 1].F;
    // G = P_f F^T P_p^-1, solved as P_p G^T = F P_f.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(p.cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
      throw SingularInnovation("smoother: predicted covariance not invertible (step " + std::to_string(t + 2) + ")");
    const Eigen::MatrixXd G = ldlt.solve(F * f.cov).transpose();

    const Eigen::Index D = f.cov.rows();
    Eigen::VectorXd diff(D);
    diff.head(d) = prob.dynamics.boxminus(s1.pose, p.pose);
    diff.tail(D - d) = s1.theta - p.theta;
    const Eigen::VectorXd corr = G * diff;

    AugmentedGaussianState<Pose> s;
    s.pose = prob.dynamics.boxplus(f.pose, corr.head(d));
    s.theta = f.theta + corr.tail(D - d);
    s.cov = f.cov + G * (s1.cov - p.cov) * G.transpose();
    detail::symmetrize(s.cov);
    out[t] = std::move(s);
  }
  return out;
}

template <class Pose>
std::vector<Pose> poses_of(const EkfResult<Pose>& r) {
  std::vector<Pose> out;
  for (const auto& s : r.steps) out.push_back(s.filtered.pose);
  return out;
}

template <class Pose>
std::vector<Pose> poses_of(const std::vector<AugmentedGaussianState<Pose>>& r) {
  std::vector<Pose> out;
  for (const auto& s : r) out.push_back(s.pose);
  return out;
}

}  // namespace rbslam

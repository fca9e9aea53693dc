#pragma once

// Independent reference computations used by the test suite and by the
// `verify` subcommand. They favour directness over speed.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "rbslam/gp_map.hpp"
#include "rbslam/inference.hpp"

namespace rbslam::oracle {

/// One conjugate update with all observations stacked (block-diagonal noise).
GaussianMapBelief batch_posterior(const GaussianMapBelief& prior, const std::vector<Eigen::MatrixXd>& Cs,
                                  const std::vector<Eigen::MatrixXd>& Sigmas, const std::vector<Eigen::VectorXd>& ys);

/// log N(ybar; Cbar mu, Cbar P Cbar^T + Sigmabar) with everything stacked densely.
double stacked_loglik(const GaussianMapBelief& prior, const std::vector<Eigen::MatrixXd>& Cs,
                      const std::vector<Eigen::MatrixXd>& Sigmas, const std::vector<Eigen::VectorXd>& ys);

/// Exact SE-kernel GP regression mean at the query points (rows of X / Xq).
Eigen::VectorXd dense_gp_mean(const KernelHyper& hyper, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& Xq);

/// Fourier transform of the SE kernel at radial frequency sqrt(lambda), by
/// midpoint quadrature on a d-dimensional grid covering +-8 ell.
double numerical_spectral_density(const KernelHyper& hyper, double lambda, int d, int points_per_axis = 161);

/// Reduced-rank kernel sum_j scale * S(lambda_j) phi_j(x) phi_j(y).
double reduced_rank_kernel(const BasisDomain& domain, const KernelHyper& hyper, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y, double spectral_scale = 1.0);

/// Central-difference Jacobian of f at x.
Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6);

/// Linear-Gaussian state space  x_{t+1} = F_t x_t + w_t,  y_t = H_t x_t + v_t.
struct LinearGaussianModel {
  Eigen::VectorXd x0;
  Eigen::MatrixXd P0;
  std::vector<Eigen::MatrixXd> F, Q;  // size T - 1
  std::vector<Eigen::MatrixXd> H, R;  // size T
  std::vector<Eigen::VectorXd> y;     // size T
};

/// Posterior mean and marginal covariances of all states from the joint
/// Gaussian (dense batch least squares).
struct BatchSmootherResult {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;
};
BatchSmootherResult batch_linear_smoother(const LinearGaussianModel& model);

/// Normalized ancestor probabilities for the reference state ref[t] by dense
/// Gaussian algebra on the whole data set:
///   w_i * p(ref[t] | x_{t-1}^i) * p(y_{0:T-1} | x_{0:t-1}^i, ref[t:]) / p(y_{0:t-1} | x_{0:t-1}^i).
/// `histories[i]` holds poses 0..t-1 of particle i. Exactly linear sensors only.
template <class Dyn, class Sensor>
Eigen::VectorXd ancestor_probabilities(const SlamProblem<Dyn, Sensor>& prob, int t,
                                       const std::vector<std::vector<typename Dyn::Pose>>& histories,
                                       const Eigen::VectorXd& prev_weights,
                                       const std::vector<typename Dyn::Pose>& ref) {
  const int N = static_cast<int>(histories.size());
  const int T = prob.steps();
  Eigen::VectorXd logp(N);
  for (int i = 0; i < N; ++i) {
    std::vector<Eigen::MatrixXd> Cs, Ss;
    std::vector<Eigen::VectorXd> ys;
    for (int tau = 0; tau < T; ++tau) {
      const auto& pose = tau < t ? histories[i][tau] : ref[tau];
      const Linearization lin = prob.sensor.linearize(pose, prob.prior.mean, prob.measurements[tau]);
      Cs.push_back(lin.C);
      Ss.push_back(lin.noise);
      ys.push_back(lin.observed);
    }
    const double joint = stacked_loglik(prob.prior, Cs, Ss, ys);
    Cs.resize(t);
    Ss.resize(t);
    ys.resize(t);
    const double past = stacked_loglik(prob.prior, Cs, Ss, ys);
    logp[i] = std::log(prev_weights[i]) +
              prob.dynamics.log_transition(histories[i][t - 1], prob.odometry[t - 1], ref[t]) + joint - past;
  }
  const double mx = logp.maxCoeff();
  Eigen::VectorXd p = (logp.array() - mx).exp();
  return p / p.sum();
}

}  // namespace rbslam::oracle

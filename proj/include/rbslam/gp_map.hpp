#pragma once

#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace rbslam {

/// Rectangular domain and the Laplace-operator eigenbasis (Dirichlet boundary)
/// used by the reduced-rank GP map. Basis functions are ordered by ascending
/// eigenvalue, i.e. by descending prior variance.
struct BasisDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXi indices;    // m x d, multi-indices j (1-based)
  Eigen::VectorXd eigenvalues;  // m, ascending

  int dim() const { return static_cast<int>(lower.size()); }
  int size() const { return static_cast<int>(eigenvalues.size()); }
  Eigen::VectorXd half_extent() const { return 0.5 * (upper - lower); }
  /// True when `x` lies at least `margin` inside every face of the box.
  bool is_interior(const Eigen::Ref<const Eigen::VectorXd>& x, double margin = 0.0) const;
};

/// Builds the eigenbasis with the `m` smallest eigenvalues on [lower, upper].
BasisDomain make_basis_domain(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int m);

/// Inflates a bounding box by max(2 * ell, 10% of the extent) on every side.
/// Returns {lower, upper}.
std::pair<Eigen::VectorXd, Eigen::VectorXd> inflate_box(const Eigen::VectorXd& lower,
                                                         const Eigen::VectorXd& upper, double ell);

/// Phi(x): the m eigenfunctions evaluated at x.
Eigen::VectorXd eigenbasis_eval(const BasisDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x);
/// m x d matrix whose row j is the gradient of eigenfunction j at x.
Eigen::MatrixXd eigenbasis_grad(const BasisDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x);
/// sum_j w_j * Hessian(phi_j)(x), a d x d matrix.
Eigen::MatrixXd eigenbasis_hessian_sum(const BasisDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXd>& weights);

struct KernelHyper {
  double sigma_f2 = 1.0;      // SE magnitude
  double ell = 1.0;           // SE lengthscale [m]
  double sigma_lin2 = 0.0;    // linear-kernel magnitude (magnetic potential only)
  double sigma_noise2 = 1.0;  // measurement noise variance
};

/// SE spectral density evaluated at frequency sqrt(lambda) in d dimensions:
/// sigma_f2 * (2 pi)^(d/2) * ell^d * exp(-ell^2 lambda / 2).
double spectral_density_se(const KernelHyper& hyper, double lambda, int d);

/// Exact SE kernel, used to check the reduced-rank reconstruction.
double kernel_se(const KernelHyper& hyper, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y);

enum class MapKind { radio, magnetic };

/// Gaussian belief N(mean, cov) over the map parameters theta.
struct GaussianMapBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const { return mean.size(); }
};

/// Radio: N(0, diag(S(lambda_j))) repeated for each channel.
/// Magnetic: N(0, diag(sigma_lin2 x3, S(lambda_1) .. S(lambda_m))).
GaussianMapBelief prior_belief(const BasisDomain& domain, const KernelHyper& hyper, MapKind kind,
                               int channels = 1);

/// Result of conditioning a belief on one linear(ized) observation.
struct MapUpdate {
  GaussianMapBelief belief;
  Eigen::VectorXd residual;        // y - C mean (before the update)
  Eigen::MatrixXd innovation_cov;  // C P C^T + Sigma
  double log_likelihood = 0.0;     // log N(residual; 0, innovation_cov)
};

/// Kalman-style conjugate update
///   K = P C^T (C P C^T + Sigma)^-1,  mean' = mean + K (y - C mean),  P' = P - K C P.
/// Throws SingularInnovation when the innovation covariance cannot be factored
/// or its condition number exceeds 1e12.
MapUpdate update_map(const GaussianMapBelief& belief, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                     const Eigen::VectorXd& y);

/// In-place variant operating on an explicit residual (y - predicted). `columns`
/// optionally lists the only columns of C that can be nonzero; passing it lets
/// sparse observations (landmarks) skip the zero blocks. Returns the predictive
/// log-likelihood of the residual. With `apply == false` the belief is untouched.
double condition_belief(GaussianMapBelief& belief, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                        const Eigen::VectorXd& residual, std::span<const int> columns = {}, bool apply = true);

/// Cholesky factor of an innovation covariance with the singularity guard applied.
Eigen::LLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& S);

/// Predictive mean and marginal variance of the mapped field at query points.
/// Radio: one column per channel. Magnetic: three columns, the navigation-frame
/// field vector (gradient of the potential).
struct FieldPrediction {
  Eigen::MatrixXd mean;      // points x outputs
  Eigen::MatrixXd variance;  // points x outputs
};

FieldPrediction predict_field(const GaussianMapBelief& belief, const BasisDomain& domain, MapKind kind,
                              const std::vector<Eigen::VectorXd>& points, int channels = 1);

/// Regular grid covering `domain` shrunk by `margin`, `per_axis` points per axis
/// (first two axes; a 3D domain is sliced at `z`).
std::vector<Eigen::VectorXd> domain_grid(const BasisDomain& domain, int per_axis, double margin = 0.0,
                                         double z = 0.0);

}  // namespace rbslam

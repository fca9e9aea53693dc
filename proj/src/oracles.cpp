#include "rbslam/oracles.hpp"

#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "rbslam/errors.hpp"

namespace rbslam::oracle {

namespace {

struct Stacked {
  Eigen::MatrixXd C;
  Eigen::MatrixXd Sigma;
  Eigen::VectorXd y;
};

Stacked stack(Eigen::Index n, const std::vector<Eigen::MatrixXd>& Cs, const std::vector<Eigen::MatrixXd>& Sigmas,
              const std::vector<Eigen::VectorXd>& ys) {
  if (Cs.size() != Sigmas.size() || Cs.size() != ys.size()) throw LengthMismatch("stacked inputs differ in length");
  Eigen::Index rows = 0;
  for (const auto& C : Cs) rows += C.rows();
  Stacked s{Eigen::MatrixXd::Zero(rows, n), Eigen::MatrixXd::Zero(rows, rows), Eigen::VectorXd::Zero(rows)};
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < Cs.size(); ++k) {
    const Eigen::Index m = Cs[k].rows();
    s.C.middleRows(r, m) = Cs[k];
    s.Sigma.block(r, r, m, m) = Sigmas[k];
    s.y.segment(r, m) = ys[k];
    r += m;
  }
  return s;
}

}  // namespace

GaussianMapBelief batch_posterior(const GaussianMapBelief& prior, const std::vector<Eigen::MatrixXd>& Cs,
                                  const std::vector<Eigen::MatrixXd>& Sigmas, const std::vector<Eigen::VectorXd>& ys) {
  const Stacked s = stack(prior.dim(), Cs, Sigmas, ys);
  if (s.y.size() == 0) return prior;
  const Eigen::MatrixXd PCt = prior.cov * s.C.transpose();
  const Eigen::MatrixXd S = s.C * PCt + s.Sigma;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::MatrixXd Kt = ldlt.solve(PCt.transpose());  // K^T
  GaussianMapBelief post;
  post.mean = prior.mean + Kt.transpose() * (s.y - s.C * prior.mean);
  post.cov = prior.cov - PCt * Kt;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

double stacked_loglik(const GaussianMapBelief& prior, const std::vector<Eigen::MatrixXd>& Cs,
                      const std::vector<Eigen::MatrixXd>& Sigmas, const std::vector<Eigen::VectorXd>& ys) {
  const Stacked s = stack(prior.dim(), Cs, Sigmas, ys);
  const Eigen::Index k = s.y.size();
  if (k == 0) return 0.0;
  const Eigen::MatrixXd S = s.C * prior.cov * s.C.transpose() + s.Sigma;
  const Eigen::VectorXd r = s.y - s.C * prior.mean;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * (static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + logdet + r.dot(ldlt.solve(r)));
}

Eigen::VectorXd dense_gp_mean(const KernelHyper& hyper, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& Xq) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kernel_se(hyper, X.row(i).transpose(), X.row(j).transpose());
  K.diagonal().array() += hyper.sigma_noise2;
  const Eigen::VectorXd alpha = K.llt().solve(y);
  Eigen::VectorXd out(Xq.rows());
  for (Eigen::Index q = 0; q < Xq.rows(); ++q) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += kernel_se(hyper, Xq.row(q).transpose(), X.row(i).transpose()) * alpha[i];
    out[q] = acc;
  }
  return out;
}

double numerical_spectral_density(const KernelHyper& hyper, double lambda, int d, int points_per_axis) {
  if (d < 1 || d > 3) throw Error("numerical spectral density supports 1 to 3 dimensions");
  const double half = 8.0 * hyper.ell;
  const double h = 2.0 * half / points_per_axis;
  const double omega = std::sqrt(lambda);
  // The SE kernel is even, so the transform is the cosine transform; the
  // frequency vector is taken along the first axis.
  Eigen::VectorXd axis(points_per_axis);
  for (int k = 0; k < points_per_axis; ++k) axis[k] = -half + (k + 0.5) * h;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
  double acc = 0.0;
  const int total = static_cast<int>(std::pow(points_per_axis, d));
  for (int flat = 0; flat < total; ++flat) {
    int rem = flat;
    for (int a = 0; a < d; ++a) {
      x[a] = axis[rem % points_per_axis];
      rem /= points_per_axis;
    }
    acc += kernel_se(hyper, x, origin) * std::cos(omega * x[0]);
  }
  return acc * std::pow(h, d);
}

double reduced_rank_kernel(const BasisDomain& domain, const KernelHyper& hyper, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y, double spectral_scale) {
  const Eigen::VectorXd px = eigenbasis_eval(domain, x);
  const Eigen::VectorXd py = eigenbasis_eval(domain, y);
  double acc = 0.0;
  for (int j = 0; j < domain.size(); ++j)
    acc += spectral_scale * spectral_density_se(hyper, domain.eigenvalues[j], domain.dim()) * px[j] * py[j];
  return acc;
}

Eigen::MatrixXd central_difference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

BatchSmootherResult batch_linear_smoother(const LinearGaussianModel& m) {
  const int T = static_cast<int>(m.y.size());
  const Eigen::Index d = m.x0.size();
  const Eigen::Index D = d * T;
  // Joint prior over the stacked states.
  Eigen::VectorXd mu(D);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(D, D);
  mu.head(d) = m.x0;
  P.topLeftCorner(d, d) = m.P0;
  for (int t = 1; t < T; ++t) {
    const Eigen::MatrixXd& F = m.F[t - 1];
    mu.segment(t * d, d) = F * mu.segment((t - 1) * d, d);
    // Cov(x_t, x_s) = F Cov(x_{t-1}, x_s) for s < t.
    const Eigen::MatrixXd cross = F * P.block((t - 1) * d, 0, d, t * d);
    P.block(t * d, 0, d, t * d) = cross;
    P.block(0, t * d, t * d, d) = cross.transpose();
    P.block(t * d, t * d, d, d) = F * P.block((t - 1) * d, (t - 1) * d, d, d) * F.transpose() + m.Q[t - 1];
  }
  Eigen::Index rows = 0;
  for (const auto& H : m.H) rows += H.rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(rows, D);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::VectorXd y(rows);
  Eigen::Index r = 0;
  for (int t = 0; t < T; ++t) {
    const Eigen::Index k = m.H[t].rows();
    H.block(r, t * d, k, d) = m.H[t];
    R.block(r, r, k, k) = m.R[t];
    y.segment(r, k) = m.y[t];
    r += k;
  }
  const Eigen::MatrixXd PHt = P * H.transpose();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(H * PHt + R);
  const Eigen::VectorXd post_mean = mu + PHt * ldlt.solve(y - H * mu);
  const Eigen::MatrixXd post_cov = P - PHt * ldlt.solve(PHt.transpose());
  BatchSmootherResult out;
  for (int t = 0; t < T; ++t) {
    out.mean.push_back(post_mean.segment(t * d, d));
    out.cov.push_back(post_cov.block(t * d, t * d, d, d));
  }
  return out;
}

}  // namespace rbslam::oracle

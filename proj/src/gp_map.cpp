#include "rbslam/gp_map.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <set>
#include <string>

#include "rbslam/errors.hpp"

namespace rbslam {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Per-dimension tables of sin/cos of pi * k * (x_d - lo_d) / (2 L_d), k = 1..kmax_d.
struct SineTables {
  std::vector<Eigen::VectorXd> sin;
  std::vector<Eigen::VectorXd> cos;
  std::vector<double> omega_unit;  // pi / (2 L_d)
  std::vector<double> norm;        // 1 / sqrt(L_d)
};

SineTables make_tables(const BasisDomain& dom, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int d = dom.dim();
  SineTables t;
  t.sin.resize(d);
  t.cos.resize(d);
  t.omega_unit.resize(d);
  t.norm.resize(d);
  for (int a = 0; a < d; ++a) {
    const double half = 0.5 * (dom.upper[a] - dom.lower[a]);
    const int kmax = dom.indices.col(a).maxCoeff();
    t.omega_unit[a] = std::numbers::pi / (2.0 * half);
    t.norm[a] = 1.0 / std::sqrt(half);
    t.sin[a].resize(kmax + 1);
    t.cos[a].resize(kmax + 1);
    const double arg = t.omega_unit[a] * (x[a] - dom.lower[a]);
    for (int k = 0; k <= kmax; ++k) {
      t.sin[a][k] = std::sin(k * arg);
      t.cos[a][k] = std::cos(k * arg);
    }
  }
  return t;
}

}  // namespace

bool BasisDomain::is_interior(const Eigen::Ref<const Eigen::VectorXd>& x, double margin) const {
  for (int a = 0; a < dim(); ++a)
    if (x[a] < lower[a] + margin || x[a] > upper[a] - margin) return false;
  return true;
}

BasisDomain make_basis_domain(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int m) {
  if (lower.size() != upper.size() || lower.size() == 0) throw Error("basis domain: bad bounds");
  if (m < 1) throw Error("basis domain: need at least one basis function");
  const int d = static_cast<int>(lower.size());
  for (int a = 0; a < d; ++a)
    if (!(upper[a] > lower[a])) throw Error("basis domain: empty extent in dimension " + std::to_string(a));

  auto eig = [&](const std::vector<int>& j) {
    double lam = 0.0;
    for (int a = 0; a < d; ++a) {
      const double w = std::numbers::pi * j[a] / (upper[a] - lower[a]);
      lam += w * w;
    }
    return lam;
  };

  // Best-first enumeration: eigenvalues grow monotonically in each index.
  using Entry = std::pair<double, std::vector<int>>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
  std::set<std::vector<int>> seen;
  std::vector<int> start(d, 1);
  frontier.emplace(eig(start), start);
  seen.insert(start);

  BasisDomain dom;
  dom.lower = lower;
  dom.upper = upper;
  dom.indices.resize(m, d);
  dom.eigenvalues.resize(m);
  for (int k = 0; k < m; ++k) {
    auto [lam, j] = frontier.top();
    frontier.pop();
    for (int a = 0; a < d; ++a) dom.indices(k, a) = j[a];
    dom.eigenvalues[k] = lam;
    for (int a = 0; a < d; ++a) {
      std::vector<int> next = j;
      ++next[a];
      if (seen.insert(next).second) frontier.emplace(eig(next), next);
    }
  }
  return dom;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> inflate_box(const Eigen::VectorXd& lower,
                                                         const Eigen::VectorXd& upper, double ell) {
  Eigen::VectorXd lo = lower, hi = upper;
  for (Eigen::Index a = 0; a < lo.size(); ++a) {
    const double margin = std::max(2.0 * ell, 0.1 * (upper[a] - lower[a]));
    lo[a] -= margin;
    hi[a] += margin;
  }
  return {lo, hi};
}

Eigen::VectorXd eigenbasis_eval(const BasisDomain& dom, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const SineTables t = make_tables(dom, x);
  const int m = dom.size(), d = dom.dim();
  Eigen::VectorXd phi(m);
  for (int j = 0; j < m; ++j) {
    double v = 1.0;
    for (int a = 0; a < d; ++a) v *= t.norm[a] * t.sin[a][dom.indices(j, a)];
    phi[j] = v;
  }
  return phi;
}

Eigen::MatrixXd eigenbasis_grad(const BasisDomain& dom, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const SineTables t = make_tables(dom, x);
  const int m = dom.size(), d = dom.dim();
  Eigen::MatrixXd g(m, d);
  for (int j = 0; j < m; ++j) {
    for (int a = 0; a < d; ++a) {
      double v = 1.0;
      for (int b = 0; b < d; ++b) {
        const int k = dom.indices(j, b);
        v *= b == a ? t.norm[b] * t.omega_unit[b] * k * t.cos[b][k] : t.norm[b] * t.sin[b][k];
      }
      g(j, a) = v;
    }
  }
  return g;
}

Eigen::MatrixXd eigenbasis_hessian_sum(const BasisDomain& dom, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Eigen::Ref<const Eigen::VectorXd>& w) {
  const SineTables t = make_tables(dom, x);
  const int m = dom.size(), d = dom.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    if (w[j] == 0.0) continue;
    for (int a = 0; a < d; ++a) {
      for (int c = a; c < d; ++c) {
        double v = 1.0;
        for (int b = 0; b < d; ++b) {
          const int k = dom.indices(j, b);
          const double om = t.omega_unit[b] * k;
          double f;
          if (b == a && b == c)
            f = -om * om * t.sin[b][k];
          else if (b == a || b == c)
            f = om * t.cos[b][k];
          else
            f = t.sin[b][k];
          v *= t.norm[b] * f;
        }
        h(a, c) += w[j] * v;
      }
    }
  }
  for (int a = 0; a < d; ++a)
    for (int c = 0; c < a; ++c) h(a, c) = h(c, a);
  return h;
}

double spectral_density_se(const KernelHyper& hyper, double lambda, int d) {
  return hyper.sigma_f2 * std::pow(2.0 * std::numbers::pi, 0.5 * d) * std::pow(hyper.ell, d) *
         std::exp(-0.5 * hyper.ell * hyper.ell * lambda);
}

double kernel_se(const KernelHyper& hyper, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y) {
  return hyper.sigma_f2 * std::exp(-0.5 * (x - y).squaredNorm() / (hyper.ell * hyper.ell));
}

GaussianMapBelief prior_belief(const BasisDomain& dom, const KernelHyper& hyper, MapKind kind, int channels) {
  const int m = dom.size();
  Eigen::VectorXd s(m);
  for (int j = 0; j < m; ++j) s[j] = spectral_density_se(hyper, dom.eigenvalues[j], dom.dim());
  GaussianMapBelief b;
  if (kind == MapKind::radio) {
    b.mean = Eigen::VectorXd::Zero(m * channels);
    Eigen::VectorXd diag(m * channels);
    for (int c = 0; c < channels; ++c) diag.segment(c * m, m) = s;
    b.cov = diag.asDiagonal();
  } else {
    b.mean = Eigen::VectorXd::Zero(m + 3);
    Eigen::VectorXd diag(m + 3);
    diag.head<3>().setConstant(hyper.sigma_lin2);
    diag.tail(m) = s;
    b.cov = diag.asDiagonal();
  }
  return b;
}

Eigen::LLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& S) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw SingularInnovation("innovation covariance is not positive definite");
  const Eigen::VectorXd d = llt.matrixLLT().diagonal();
  const double lo = d.minCoeff(), hi = d.maxCoeff();
  if (!(lo > 0.0) || (hi / lo) * (hi / lo) > 1e12)
    throw SingularInnovation("innovation covariance condition number exceeds 1e12");
  return llt;
}

double condition_belief(GaussianMapBelief& b, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                        const Eigen::VectorXd& residual, std::span<const int> columns, bool apply) {
  const Eigen::Index k = C.rows();
  if (k == 0) return 0.0;
  if (C.cols() != b.dim() || Sigma.rows() != k || residual.size() != k)
    throw LengthMismatch("condition_belief: inconsistent dimensions");

  Eigen::MatrixXd PCt;  // n x k
  if (columns.empty()) {
    PCt.noalias() = b.cov * C.transpose();
  } else {
    std::vector<int> cols(columns.begin(), columns.end());
    PCt.noalias() = b.cov(Eigen::all, cols) * C(Eigen::all, cols).transpose();
  }
  Eigen::MatrixXd S = Sigma;
  if (columns.empty()) {
    S.noalias() += C * PCt;
  } else {
    std::vector<int> cols(columns.begin(), columns.end());
    S.noalias() += C(Eigen::all, cols) * PCt(cols, Eigen::all);
  }
  const auto llt = factor_innovation(S);
  const Eigen::VectorXd white = llt.matrixL().solve(residual);
  const double loglik = -0.5 * (static_cast<double>(k) * kLog2Pi +
                                2.0 * llt.matrixLLT().diagonal().array().log().sum() + white.squaredNorm());
  if (!apply) return loglik;

  // K C P = W W^T with W = P C^T L^-T, so the downdate stays exactly symmetric.
  const Eigen::MatrixXd W = llt.matrixL().solve(PCt.transpose()).transpose();
  b.mean.noalias() += W * white;
  if (k == 1) {
    // w_i w_j and w_j w_i are the same product, so this stays bit-symmetric.
    b.cov.noalias() -= W.col(0) * W.col(0).transpose();
  } else {
    b.cov.selfadjointView<Eigen::Lower>().rankUpdate(W, -1.0);
    b.cov.triangularView<Eigen::StrictlyUpper>() = b.cov.transpose();
  }
  return loglik;
}

MapUpdate update_map(const GaussianMapBelief& belief, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                     const Eigen::VectorXd& y) {
  MapUpdate out;
  out.belief = belief;
  out.residual = y - C * belief.mean;
  out.innovation_cov = C * belief.cov * C.transpose() + Sigma;
  out.log_likelihood = condition_belief(out.belief, C, Sigma, out.residual);
  return out;
}

FieldPrediction predict_field(const GaussianMapBelief& belief, const BasisDomain& dom, MapKind kind,
                              const std::vector<Eigen::VectorXd>& points, int channels) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const int m = dom.size();
  FieldPrediction out;
  if (kind == MapKind::radio) {
    Eigen::MatrixXd Phi(n, m);
    for (Eigen::Index i = 0; i < n; ++i) Phi.row(i) = eigenbasis_eval(dom, points[i]).transpose();
    out.mean.resize(n, channels);
    out.variance.resize(n, channels);
    for (int c = 0; c < channels; ++c) {
      const auto mu = belief.mean.segment(c * m, m);
      const auto P = belief.cov.block(c * m, c * m, m, m);
      out.mean.col(c) = Phi * mu;
      const Eigen::MatrixXd PhiP = Phi * P;
      out.variance.col(c) = PhiP.cwiseProduct(Phi).rowwise().sum();
    }
    return out;
  }
  out.mean.resize(n, 3);
  out.variance.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd C(3, m + 3);
    C.leftCols<3>().setIdentity();
    C.rightCols(m) = eigenbasis_grad(dom, points[i]).transpose();
    out.mean.row(i) = (C * belief.mean).transpose();
    out.variance.row(i) = (C * belief.cov * C.transpose()).diagonal().transpose();
  }
  return out;
}

std::vector<Eigen::VectorXd> domain_grid(const BasisDomain& dom, int per_axis, double margin, double z) {
  std::vector<Eigen::VectorXd> pts;
  const double x0 = dom.lower[0] + margin, x1 = dom.upper[0] - margin;
  const double y0 = dom.lower[1] + margin, y1 = dom.upper[1] - margin;
  for (int iy = 0; iy < per_axis; ++iy) {
    for (int ix = 0; ix < per_axis; ++ix) {
      Eigen::VectorXd p(dom.dim());
      p[0] = x0 + (x1 - x0) * ix / std::max(1, per_axis - 1);
      p[1] = y0 + (y1 - y0) * iy / std::max(1, per_axis - 1);
      if (dom.dim() > 2) p[2] = z;
      pts.push_back(p);
    }
  }
  return pts;
}

}  // namespace rbslam

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rbslam/errors.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/oracles.hpp"
#include "support.hpp"

namespace rbslam {
namespace {

using testing::randn;

BasisDomain interval(int m) { return make_basis_domain(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0), m); }

TEST(Eigenbasis, FirstSineAtMidpoint) {
  const BasisDomain d = interval(4);
  const Eigen::VectorXd phi = eigenbasis_eval(d, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(phi[0], 1.0, 1e-15);
  EXPECT_NEAR(d.eigenvalues[0], std::pow(std::numbers::pi / 2.0, 2), 1e-14);
}

TEST(Eigenbasis, VanishesOnBoundary) {
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-1, -2, 0), Eigen::Vector3d(1, 2, 0.5), 30);
  for (const Eigen::Vector3d x : {Eigen::Vector3d(-1, 0.3, 0.2), Eigen::Vector3d(0.1, 2, 0.2), Eigen::Vector3d(0.4, 0.3, 0)})
    EXPECT_LT(eigenbasis_eval(d, x).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Eigenbasis, EigenvaluesAscendingAndOrthonormal) {
  const BasisDomain d = interval(6);
  for (int j = 1; j < d.size(); ++j) EXPECT_LE(d.eigenvalues[j - 1], d.eigenvalues[j]);
  // Midpoint quadrature of phi_i phi_j over [-1, 1].
  const int n = 4000;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(6, 6);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -1.0 + (k + 0.5) * 2.0 / n);
    const Eigen::VectorXd phi = eigenbasis_eval(d, x);
    G += phi * phi.transpose() * (2.0 / n);
  }
  EXPECT_LT((G - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EigenbasisGrad, SymmetricAtCenter) {
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1), 10);
  ASSERT_EQ(d.indices.row(0), Eigen::RowVector3i(1, 1, 1));
  const Eigen::MatrixXd g = eigenbasis_grad(d, Eigen::Vector3d::Zero());
  EXPECT_LT(g.row(0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EigenbasisGrad, MatchesCentralDifference) {
  Rng rng = SeedStream(21).engine();
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-2, -1.5, -0.5), Eigen::Vector3d(2, 1.5, 1.0), 64);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d p = 0.8 * randn(3, rng).cwiseMin(1.0).cwiseMax(-1.0).cwiseProduct(Eigen::Vector3d(2, 1.5, 0.5));
    const Eigen::MatrixXd g = eigenbasis_grad(d, p);
    const Eigen::MatrixXd fd =
        oracle::central_difference([&](const Eigen::VectorXd& x) { return eigenbasis_eval(d, x); }, p);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
}

TEST(EigenbasisHessian, MatchesDifferenceOfGradients) {
  Rng rng = SeedStream(22).engine();
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-2, -2, -1), Eigen::Vector3d(2, 2, 1), 40);
  const Eigen::VectorXd w = randn(d.size(), rng);
  const Eigen::Vector3d p(0.3, -0.4, 0.2);
  const Eigen::MatrixXd H = eigenbasis_hessian_sum(d, p, w);
  const Eigen::MatrixXd fd = oracle::central_difference(
      [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(eigenbasis_grad(d, x).transpose() * w); }, p);
  EXPECT_LT((H - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, H.cwiseAbs().maxCoeff()));
}

TEST(SpectralDensity, ClosedFormAtZeroFrequency) {
  const KernelHyper h{2.0, 0.25, 0.0, 0.01};
  // 2 * 2 pi * 0.0625 = 0.785398...
  EXPECT_NEAR(spectral_density_se(h, 0.0, 2), 0.7853981633974483, 1e-12);
  EXPECT_NEAR(oracle::numerical_spectral_density(h, 0.0, 2), 0.7853981633974483, 1e-6);
}

TEST(SpectralDensity, MatchesNumericalFourierTransform) {
  const KernelHyper h{1.5, 0.6, 0.0, 0.1};
  for (int d : {1, 2, 3})
    for (double lambda : {0.5, 4.0, 20.0}) {
      const double a = spectral_density_se(h, lambda, d);
      const double b = oracle::numerical_spectral_density(h, lambda, d, d == 3 ? 81 : 161);
      EXPECT_NEAR(a, b, 1e-4 * std::max(a, 1e-3)) << "d=" << d << " lambda=" << lambda;
    }
}

TEST(KernelReconstruction, InteriorErrorBelowFivePercent) {
  const KernelHyper h{2.0, 0.25, 0.0, 0.01};
  const auto [lo, hi] = inflate_box(Eigen::Vector2d(0, 0), Eigen::Vector2d(1.5, 1.5), h.ell);
  const BasisDomain d = make_basis_domain(lo, hi, 128);
  double worst = 0.0;
  for (double x = 0.0; x <= 1.5; x += 0.25)
    for (double y = 0.0; y <= 1.5; y += 0.25) {
      const Eigen::Vector2d p(x, y);
      if (!d.is_interior(p, 2 * h.ell)) continue;
      for (const Eigen::Vector2d off : {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.1, 0.05), Eigen::Vector2d(0.25, 0)}) {
        const Eigen::Vector2d q = p + off;
        worst = std::max(worst, std::abs(oracle::reduced_rank_kernel(d, h, p, q) - kernel_se(h, p, q)));
      }
    }
  EXPECT_LT(worst, 0.05 * h.sigma_f2);
}

TEST(PriorBelief, RadioShape) {
  const KernelHyper h{2.0, 0.25, 0.0, 0.01};
  const BasisDomain d = make_basis_domain(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 2);
  const GaussianMapBelief b = prior_belief(d, h, MapKind::radio);
  ASSERT_EQ(b.dim(), 2);
  EXPECT_TRUE(b.mean.isZero(0.0));
  EXPECT_DOUBLE_EQ(b.cov(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(b.cov(0, 0), spectral_density_se(h, d.eigenvalues[0], 2));
  EXPECT_EQ(prior_belief(d, h, MapKind::radio, 3).dim(), 6);
}

TEST(PriorBelief, MagneticLinearBlock) {
  const KernelHyper h{200.0, 1.3, 650.0, 10.0};
  const BasisDomain d = make_basis_domain(Eigen::Vector3d(-3, -3, -2), Eigen::Vector3d(3, 3, 2), 20);
  const GaussianMapBelief b = prior_belief(d, h, MapKind::magnetic);
  ASSERT_EQ(b.dim(), 23);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(b.cov(i, i), 650.0);
  EXPECT_DOUBLE_EQ(b.cov(3, 3), spectral_density_se(h, d.eigenvalues[0], 3));
}

TEST(UpdateMap, ScalarConjugateUpdate) {
  GaussianMapBelief b{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  const MapUpdate u = update_map(b, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_NEAR(u.belief.mean[0], 1.0, 1e-15);
  EXPECT_NEAR(u.belief.cov(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(u.residual[0], 2.0, 1e-15);
  EXPECT_NEAR(u.innovation_cov(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(u.log_likelihood, -0.5 * (std::log(2 * std::numbers::pi * 2.0) + 2.0), 1e-14);
}

TEST(UpdateMap, ZeroRowsLeaveBeliefUnchanged) {
  Rng rng = SeedStream(2).engine();
  GaussianMapBelief b{randn(5, rng), testing::random_spd(5, rng)};
  const MapUpdate u = update_map(b, Eigen::MatrixXd::Zero(2, 5), Eigen::MatrixXd::Identity(2, 2), randn(2, rng));
  EXPECT_EQ(u.belief.mean, b.mean);
  EXPECT_EQ(u.belief.cov, b.cov);
}

TEST(UpdateMap, SingularInnovationThrows) {
  GaussianMapBelief b{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2)};
  EXPECT_THROW(update_map(b, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2)),
               SingularInnovation);
  Eigen::Matrix2d S;
  S << 1.0, 0.0, 0.0, 1e-14;
  EXPECT_THROW(update_map(b, Eigen::MatrixXd::Identity(2, 2), S, Eigen::VectorXd::Ones(2)), SingularInnovation);
}

// Recursive conditioning over random steps reproduces the stacked batch posterior.
TEST(UpdateMap, RecursiveEqualsBatchPosterior) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng = SeedStream(seed).child(30).engine();
    const int n = 8, T = 200;
    GaussianMapBelief prior{randn(n, rng), testing::random_spd(n, rng)};
    std::vector<Eigen::MatrixXd> Cs, Ss;
    std::vector<Eigen::VectorXd> ys;
    GaussianMapBelief b = prior;
    for (int t = 0; t < T; ++t) {
      const int rows = 1 + static_cast<int>(rng() % 3);
      Eigen::MatrixXd C(rows, n);
      for (int r = 0; r < rows; ++r) C.row(r) = randn(n, rng).transpose();
      const Eigen::MatrixXd S = testing::random_spd(rows, rng);
      const Eigen::VectorXd y = randn(rows, rng);
      b = update_map(b, C, S, y).belief;
      Cs.push_back(C);
      Ss.push_back(S);
      ys.push_back(y);
    }
    const GaussianMapBelief batch = oracle::batch_posterior(prior, Cs, Ss, ys);
    EXPECT_LT((b.mean - batch.mean).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((b.cov - batch.cov).cwiseAbs().maxCoeff() / batch.cov.trace(), 1e-8);
  }
}

TEST(ConditionBelief, SparseColumnsMatchDense) {
  Rng rng = SeedStream(8).engine();
  const int n = 10;
  GaussianMapBelief a{randn(n, rng), testing::random_spd(n, rng)};
  GaussianMapBelief b = a;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, n);
  const std::vector<int> cols{2, 3, 7};
  for (int c : cols) C.col(c) = randn(2, rng);
  const Eigen::MatrixXd S = testing::random_spd(2, rng);
  const Eigen::VectorXd r = randn(2, rng);
  const double la = condition_belief(a, C, S, r);
  const double lb = condition_belief(b, C, S, r, cols);
  EXPECT_NEAR(la, lb, 1e-11);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((a.cov - b.cov).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(ConditionBelief, ApplyFalseOnlyScores) {
  Rng rng = SeedStream(9).engine();
  GaussianMapBelief a{randn(4, rng), testing::random_spd(4, rng)};
  const GaussianMapBelief before = a;
  const Eigen::MatrixXd C = Eigen::MatrixXd::Ones(1, 4);
  const double l = condition_belief(a, C, Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Ones(1), {}, false);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(a.mean, before.mean);
  EXPECT_EQ(a.cov, before.cov);
}

TEST(PredictField, PriorPredictive) {
  const KernelHyper h{2.0, 0.5, 0.0, 0.01};
  const BasisDomain d = testing::square_domain(2.0, 32);
  const GaussianMapBelief b = prior_belief(d, h, MapKind::radio);
  const std::vector<Eigen::VectorXd> pts = domain_grid(d, 5, 0.2);
  const FieldPrediction f = predict_field(b, d, MapKind::radio, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd phi = eigenbasis_eval(d, pts[i]);
    EXPECT_DOUBLE_EQ(f.mean(i, 0), 0.0);
    EXPECT_NEAR(f.variance(i, 0), phi.dot(b.cov * phi), 1e-12);
  }
}

TEST(PredictField, VarianceDropsWhereObserved) {
  const KernelHyper h{2.0, 0.5, 0.0, 0.01};
  const BasisDomain d = testing::square_domain(2.0, 32);
  const GaussianMapBelief b = prior_belief(d, h, MapKind::radio);
  const Eigen::Vector2d x(0.3, -0.2);
  const Eigen::MatrixXd C = eigenbasis_eval(d, x).transpose();
  const GaussianMapBelief post = update_map(b, C, 0.01 * Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Ones(1)).belief;
  const std::vector<Eigen::VectorXd> pts{x};
  EXPECT_LT(predict_field(post, d, MapKind::radio, pts).variance(0, 0),
            predict_field(b, d, MapKind::radio, pts).variance(0, 0));
}

TEST(PredictField, MatchesDenseGpOnInterval) {
  const KernelHyper h{1.0, 0.3, 0.0, 0.01};
  const auto [lo, hi] = inflate_box(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 3.0), h.ell);
  const BasisDomain d = make_basis_domain(lo, hi, 64);
  Rng rng = SeedStream(13).engine();
  const int n = 40;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  GaussianMapBelief b = prior_belief(d, h, MapKind::radio);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 3.0 * (i + 0.5) / n;
    y[i] = std::sin(2.0 * X(i, 0)) + 0.1 * randn(1, rng)[0];
    b = update_map(b, eigenbasis_eval(d, X.row(i).transpose()).transpose(), h.sigma_noise2 * Eigen::MatrixXd::Identity(1, 1),
                   y.segment(i, 1)).belief;
  }
  std::vector<Eigen::VectorXd> q;
  Eigen::MatrixXd Xq(0, 1);
  for (double x = 2 * h.ell; x <= 3.0 - 2 * h.ell + 1e-9; x += 0.1) {
    q.push_back(Eigen::VectorXd::Constant(1, x));
    Xq.conservativeResize(Xq.rows() + 1, 1);
    Xq(Xq.rows() - 1, 0) = x;
  }
  const Eigen::VectorXd exact = oracle::dense_gp_mean(h, X, y, Xq);
  const FieldPrediction f = predict_field(b, d, MapKind::radio, q);
  for (Eigen::Index i = 0; i < exact.size(); ++i) EXPECT_NEAR(f.mean(i, 0), exact[i], 0.05 * std::max(1.0, std::abs(exact[i])));
}

TEST(BasisDomain, RejectsBadBounds) {
  EXPECT_THROW(make_basis_domain(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), 4), Error);
  EXPECT_THROW(make_basis_domain(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 0), Error);
}

}  // namespace
}  // namespace rbslam

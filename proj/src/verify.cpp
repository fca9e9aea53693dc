#include "rbslam/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "rbslam/geometry.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/inference.hpp"
#include "rbslam/oracles.hpp"
#include "rbslam/rng.hpp"
#include "rbslam/sensors.hpp"

namespace rbslam {

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Eigen::VectorXd randn(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

template <class Fn>
VerifyCheck timed(const std::string& name, double tol, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  VerifyCheck c;
  c.name = name;
  c.tolerance = tol;
  c.observed = fn();
  c.passed = std::isfinite(c.observed) && c.observed <= tol;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

BasisDomain square_domain(double half, int m) {
  return make_basis_domain(Eigen::Vector2d::Constant(-half), Eigen::Vector2d::Constant(half), m);
}

/// Random SPD covariance with eigenvalues in a moderate range.
Eigen::MatrixXd random_spd(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index j = 0; j < n; ++j) A.col(j) = randn(n, rng);
  return A * A.transpose() / static_cast<double>(n) + 0.05 * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

void VerifyReport::print(std::ostream& os) const {
  os << fmt::format("{:<34} {:>12} {:>12} {:>9}  {}\n", "check", "tolerance", "observed", "time[s]", "result");
  for (const auto& c : checks)
    os << fmt::format("{:<34} {:>12.3e} {:>12.3e} {:>9.2f}  {}\n", c.name, c.tolerance, c.observed, c.seconds,
                      c.passed ? "PASS" : "FAIL");
}

VerifyCheck check_rb_batch_equivalence(std::uint64_t seed, int steps) {
  return timed("rb_batch_equivalence", 1e-8, [&] {
    Rng rng = SeedStream(seed).child(1).engine();
    const KernelHyper hyper{2.0, 0.25, 0.0, 0.01};
    const BasisDomain dom = square_domain(2.0, 64);
    const RadioSensor sensor(dom, hyper);
    const GaussianMapBelief prior = prior_belief(dom, hyper, MapKind::radio);
    const Eigen::VectorXd theta = randn(dom.size(), rng).cwiseProduct(prior.cov.diagonal().cwiseSqrt());
    std::vector<Eigen::MatrixXd> Cs, Ss;
    std::vector<Eigen::VectorXd> ys;
    GaussianMapBelief rec = prior;
    GaussianMapBelief inplace = prior;
    for (int t = 0; t < steps; ++t) {
      const PosePlanar pose(Eigen::Vector2d(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)), 0.0);
      const Measurement y = sensor.simulate(pose, theta, rng);
      const Eigen::MatrixXd C = sensor.C(pose);
      rec = update_map(rec, C, sensor.noise_cov(), y.values).belief;
      condition_belief(inplace, C, sensor.noise_cov(), y.values - C * inplace.mean);
      Cs.push_back(C);
      Ss.push_back(sensor.noise_cov());
      ys.push_back(y.values);
    }
    const GaussianMapBelief batch = oracle::batch_posterior(prior, Cs, Ss, ys);
    const double scale = prior.cov.trace();
    double err = 0.0;
    for (const auto* b : {&rec, &inplace}) {
      err = std::max(err, (b->mean - batch.mean).cwiseAbs().maxCoeff());
      err = std::max(err, (b->cov - batch.cov).cwiseAbs().maxCoeff() / scale);
    }
    return err;
  });
}

VerifyCheck check_chain_rule(std::uint64_t seed, int cases) {
  return timed("chain_rule_identity", 1e-6, [&] {
    Rng rng = SeedStream(seed).child(2).engine();
    const KernelHyper hyper{2.0, 0.25, 0.0, 0.01};
    const BasisDomain dom = square_domain(2.0, 16);
    double err = 0.0;
    for (int c = 0; c < cases; ++c) {
      const int channels = 1 + c % 2;
      const RadioSensor sensor(dom, hyper, channels);
      GaussianMapBelief b;
      b.mean = randn(sensor.state_dim(), rng);
      b.cov = random_spd(sensor.state_dim(), rng);
      const int steps = 1 + c % 10;
      std::vector<Eigen::MatrixXd> Cs;
      std::vector<Eigen::VectorXd> ys;
      for (int t = 0; t < steps; ++t) {
        const PosePlanar pose(Eigen::Vector2d(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)), 0.0);
        Cs.push_back(sensor.C(pose));
        ys.push_back(randn(channels, rng));
      }
      const double dense = future_loglik_dense(b, Cs, ys, sensor.noise_cov());
      const double seq = future_loglik_sequential(b, Cs, ys, sensor.noise_cov());
      const double info = future_loglik(b, Cs, ys, sensor.noise_cov());
      err = std::max({err, std::abs(dense - seq), std::abs(dense - info)});
    }
    return err;
  });
}

VerifyCheck check_kernel_reconstruction(double spectral_scale) {
  const KernelHyper hyper{2.0, 0.25, 0.0, 0.01};
  return timed("kernel_reconstruction", 0.05 * hyper.sigma_f2, [&] {
    // The square radio scenario's domain: a 3 m path box inflated by 0.5 m.
    const BasisDomain dom =
        make_basis_domain(Eigen::Vector2d::Constant(-0.5), Eigen::Vector2d::Constant(3.5), 128);
    const double margin = 2.0 * hyper.ell;
    double err = 0.0;
    const int n = 13;
    const std::vector<Eigen::Vector2d> offsets = {
        {0.0, 0.0}, {0.1, 0.0}, {0.0, 0.2}, {0.25, 0.25}, {0.5, 0.0}, {-0.3, 0.4}};
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Eigen::Vector2d x(-0.5 + margin + (3.0 * a) / (n - 1), -0.5 + margin + (3.0 * b) / (n - 1));
        for (const auto& d : offsets) {
          const Eigen::Vector2d y = x + d;
          if (!dom.is_interior(y, margin)) continue;
          const double approx = oracle::reduced_rank_kernel(dom, hyper, x, y, spectral_scale);
          err = std::max(err, std::abs(approx - kernel_se(hyper, x, y)));
        }
      }
    return err;
  });
}

VerifyCheck check_spectral_density() {
  return timed("spectral_density_quadrature", 1e-6, [] {
    const KernelHyper hyper{2.0, 0.25, 0.0, 0.01};
    double err = 0.0;
    for (int d = 1; d <= 3; ++d)
      for (double lambda : {0.0, 4.0, 25.0, 100.0}) {
        const double exact = spectral_density_se(hyper, lambda, d);
        const double num = oracle::numerical_spectral_density(hyper, lambda, d, d == 3 ? 81 : 161);
        err = std::max(err, std::abs(num - exact) / exact);
      }
    return err;
  });
}

VerifyCheck check_basis_gradient(std::uint64_t seed) {
  return timed("basis_gradient_fd", 1e-5, [&] {
    Rng rng = SeedStream(seed).child(3).engine();
    const BasisDomain dom = make_basis_domain(Eigen::Vector3d(-3, -2, -1), Eigen::Vector3d(3, 2, 1.5), 64);
    double err = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Eigen::Vector3d x(uniform(rng, -2.5, 2.5), uniform(rng, -1.5, 1.5), uniform(rng, -0.5, 1.0));
      const Eigen::MatrixXd G = eigenbasis_grad(dom, x);
      const Eigen::MatrixXd fd =
          oracle::central_difference([&](const Eigen::VectorXd& p) { return eigenbasis_eval(dom, p); }, x);
      err = std::max(err, (G - fd).cwiseAbs().maxCoeff() / std::max(1.0, G.cwiseAbs().maxCoeff()));
    }
    return err;
  });
}

VerifyCheck check_magnetic_jacobian(std::uint64_t seed) {
  return timed("magnetic_jacobian_and_curl", 1e-4, [&] {
    Rng rng = SeedStream(seed).child(4).engine();
    const KernelHyper hyper{200.0, 1.3, 650.0, 10.0};
    const BasisDomain dom = make_basis_domain(Eigen::Vector3d(-5, -5, -3), Eigen::Vector3d(5, 5, 3), 64);
    const MagneticSensor sensor(dom, hyper);
    const GaussianMapBelief prior = prior_belief(dom, hyper, MapKind::magnetic);
    const Pose3DDynamics dyn;
    double err = 0.0;
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd theta = randn(sensor.state_dim(), rng).cwiseProduct(prior.cov.diagonal().cwiseSqrt());
      Pose3D pose;
      pose.position = Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -1, 1));
      pose.orientation = quat_exp(randn(3, rng));
      const Measurement y = sensor.simulate(pose, theta, rng);
      const Linearization lin = sensor.linearize(pose, theta, y, true);
      const Eigen::MatrixXd fd = oracle::central_difference(
          [&](const Eigen::VectorXd& d) { return Eigen::VectorXd(sensor.C(dyn.boxplus(pose, d)) * theta); },
          Eigen::VectorXd::Zero(6));
      const double scale = std::max(1.0, lin.pose_jacobian.cwiseAbs().maxCoeff());
      err = std::max(err, (lin.pose_jacobian - fd).cwiseAbs().maxCoeff() / scale);
      // Curl-free: the spatial Jacobian of the navigation-frame field is symmetric.
      Pose3D level = pose;
      level.orientation = Eigen::Quaterniond::Identity();
      const Eigen::MatrixXd Jp = oracle::central_difference(
          [&](const Eigen::VectorXd& p) {
            Pose3D q = level;
            q.position = p;
            return Eigen::VectorXd(sensor.C(q) * theta);
          },
          level.position, 1e-5);
      err = std::max(err, (Jp - Jp.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, Jp.cwiseAbs().maxCoeff()));
    }
    return err;
  });
}

VerifyCheck check_visual_jacobian(std::uint64_t seed) {
  return timed("visual_jacobian_fd", 1e-5, [&] {
    Rng rng = SeedStream(seed).child(5).engine();
    const int L = 6;
    const Visual2dSensor sensor(Camera2D{}, L, 0.01);
    const PlanarDynamics dyn(IncrementFrame::navigation);
    double err = 0.0;
    for (int k = 0; k < 20; ++k) {
      const PosePlanar pose(Eigen::Vector2d(uniform(rng, -1, 1), uniform(rng, -1, 1)), uniform(rng, -3, 3));
      // Landmarks in front of the camera: camera frame (x, depth) -> navigation frame.
      Eigen::VectorXd theta(2 * L);
      Measurement y;
      for (int j = 0; j < L; ++j) {
        const Eigen::Vector2d cc(uniform(rng, -1.0, 1.0), uniform(rng, 2.0, 5.0));
        theta.segment<2>(2 * j) = pose.position + rot2(pose.heading) * cc;
        y.ids.push_back(j);
      }
      y.values = Eigen::VectorXd::Zero(L);
      const Linearization lin = sensor.linearize(pose, theta, y, true);
      const Eigen::MatrixXd fd_theta = oracle::central_difference(
          [&](const Eigen::VectorXd& th) { return sensor.linearize(pose, th, y).predicted; }, theta);
      const Eigen::MatrixXd fd_pose = oracle::central_difference(
          [&](const Eigen::VectorXd& d) { return sensor.linearize(dyn.boxplus(pose, d), theta, y).predicted; },
          Eigen::VectorXd::Zero(3));
      err = std::max(err, (lin.C - fd_theta).cwiseAbs().maxCoeff() / std::max(1.0, lin.C.cwiseAbs().maxCoeff()));
      err = std::max(err, (lin.pose_jacobian - fd_pose).cwiseAbs().maxCoeff() /
                              std::max(1.0, lin.pose_jacobian.cwiseAbs().maxCoeff()));
    }
    return err;
  });
}

namespace {

// Enumerable ancestor toy: N = 3 particles, T = 3 steps, scalar radio field.
// Each case holds the particle histories up to t - 1 and the reference path.
struct AncestorToy {
  SlamProblem<PlanarDynamics, RadioSensor> prob;
  std::vector<PosePlanar> ref;
  struct Case {
    int t = 0;
    std::vector<std::vector<PosePlanar>> hist;
    std::vector<PosePlanar> prev;
    std::vector<GaussianMapBelief> beliefs;
    Eigen::VectorXd w;
  };
  std::vector<Case> cases;
};

AncestorToy ancestor_toy(std::uint64_t seed) {
  Rng rng = SeedStream(seed).child(6).engine();
  const KernelHyper hyper{2.0, 0.5, 0.0, 0.05};
  const BasisDomain dom = square_domain(2.0, 12);
  AncestorToy toy;
  auto& prob = toy.prob;
  prob.dynamics = PlanarDynamics(IncrementFrame::navigation);
  prob.sensor = RadioSensor(dom, hyper);
  prob.prior = prior_belief(dom, hyper, MapKind::radio);
  const int T = 3, N = 3;
  PlanarOdometry odo;
  odo.increment.dp = Eigen::Vector2d(0.3, 0.1);
  odo.noise.Qp = 0.04 * Eigen::Matrix2d::Identity();
  odo.noise.Qq = 0.01;
  prob.odometry.assign(T - 1, odo);
  const Eigen::VectorXd theta = randn(dom.size(), rng).cwiseProduct(prob.prior.cov.diagonal().cwiseSqrt());
  PosePlanar p(Eigen::Vector2d(-0.5, 0.0), 0.0);
  for (int t = 0; t < T; ++t) {
    toy.ref.push_back(p);
    prob.measurements.push_back(prob.sensor.simulate(p, theta, rng));
    p = prob.dynamics.propagate(p, odo, rng);
  }
  for (int t = 1; t < T; ++t) {
    AncestorToy::Case c;
    c.t = t;
    c.hist.resize(N);
    c.prev.resize(N);
    c.beliefs.assign(N, prob.prior);
    for (int i = 0; i < N; ++i) {
      PosePlanar q = toy.ref[0];
      for (int tau = 0; tau < t; ++tau) {
        if (tau > 0) q = prob.dynamics.propagate(q, odo, rng);
        c.hist[i].push_back(q);
        const Linearization lin = prob.sensor.linearize(q, c.beliefs[i].mean, prob.measurements[tau]);
        condition_belief(c.beliefs[i], lin.C, lin.noise, lin.residual());
      }
      c.prev[i] = c.hist[i].back();
    }
    c.w = (randn(N, rng).array().abs() + 0.1).matrix();
    c.w /= c.w.sum();
    toy.cases.push_back(std::move(c));
  }
  return toy;
}

}  // namespace

VerifyCheck check_ancestor_weights(std::uint64_t seed) {
  return timed("ancestor_weights_bruteforce", 1e-9, [&] {
    const AncestorToy toy = ancestor_toy(seed);
    const std::vector<double> bounds = future_bounds(toy.prob);
    const FutureCache cache = build_future_cache(toy.prob, toy.ref);
    FilterOptions opt;
    opt.prune_log_ratio = 800.0;
    double err = 0.0;
    for (const auto& c : toy.cases) {
      const Eigen::VectorXd expected = oracle::ancestor_probabilities(toy.prob, c.t, c.hist, c.w, toy.ref);
      for (const FutureCache* fc : {static_cast<const FutureCache*>(nullptr), &cache}) {
        const Eigen::VectorXd lw = ancestor_log_weights(toy.prob, c.t, c.prev, c.beliefs, c.w, toy.ref, fc, bounds, opt);
        err = std::max(err, (normalize_log_weights(lw, c.t + 1) - expected).cwiseAbs().maxCoeff());
      }
    }
    return err;
  });
}

VerifyCheck check_ancestor_sampling(std::uint64_t seed, int draws) {
  return timed("ancestor_sampling_frequencies", 0.02, [&] {
    const AncestorToy toy = ancestor_toy(seed);
    const std::vector<double> bounds = future_bounds(toy.prob);
    const FutureCache cache = build_future_cache(toy.prob, toy.ref);
    const FilterOptions opt;
    Rng rng = SeedStream(seed).child(7).engine();
    double err = 0.0;
    for (const auto& c : toy.cases) {
      const Eigen::VectorXd expected = oracle::ancestor_probabilities(toy.prob, c.t, c.hist, c.w, toy.ref);
      const Eigen::VectorXd lw = ancestor_log_weights(toy.prob, c.t, c.prev, c.beliefs, c.w, toy.ref, &cache, bounds, opt);
      const Eigen::VectorXd p = normalize_log_weights(lw, c.t + 1);
      Eigen::VectorXd freq = Eigen::VectorXd::Zero(p.size());
      for (int k = 0; k < draws; ++k) freq[sample_index(p, rng)] += 1.0;
      err = std::max(err, (freq / draws - expected).cwiseAbs().maxCoeff());
    }
    return err;
  });
}

VerifyReport verify_suite(const VerifyOptions& opt) {
  VerifyReport r;
  r.checks.push_back(check_rb_batch_equivalence(opt.seed));
  r.checks.push_back(check_chain_rule(opt.seed));
  r.checks.push_back(check_kernel_reconstruction(opt.spectral_scale));
  r.checks.push_back(check_spectral_density());
  r.checks.push_back(check_basis_gradient(opt.seed));
  r.checks.push_back(check_magnetic_jacobian(opt.seed));
  r.checks.push_back(check_visual_jacobian(opt.seed));
  r.checks.push_back(check_ancestor_weights(opt.seed));
  return r;
}

}  // namespace rbslam

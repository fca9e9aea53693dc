#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rbslam/errors.hpp"
#include "rbslam/geometry.hpp"
#include "rbslam/gp_map.hpp"
#include "rbslam/parallel.hpp"
#include "rbslam/rng.hpp"
#include "rbslam/sensors.hpp"

namespace rbslam {

// ---------------------------------------------------------------------------
// Problem definition
// ---------------------------------------------------------------------------

/// A SLAM data set together with its model. Pose t (0-based) is observed by
/// measurements[t]; odometry[t] moves pose t to pose t + 1. The first pose is x0.
template <class Dyn, class Sensor>
struct SlamProblem {
  using Dynamics = Dyn;
  using SensorModel = Sensor;
  using Pose = typename Dyn::Pose;
  using Odometry = typename Dyn::Odometry;

  Dyn dynamics;
  Sensor sensor;
  GaussianMapBelief prior;
  Pose x0;
  std::vector<Odometry> odometry;
  std::vector<Measurement> measurements;

  int steps() const { return static_cast<int>(measurements.size()); }

  void validate() const {
    if (measurements.empty()) throw LengthMismatch("problem has no measurements");
    if (odometry.size() + 1 != measurements.size())
      throw LengthMismatch("expected " + std::to_string(measurements.size() - 1) + " odometry samples, got " +
                           std::to_string(odometry.size()));
    if (prior.dim() != sensor.state_dim()) throw LengthMismatch("prior dimension does not match the sensor");
  }
};

// ---------------------------------------------------------------------------
// Weight utilities
// ---------------------------------------------------------------------------

/// log N(y; C mean, C P C^T + Sigma).
double predictive_loglik(const GaussianMapBelief& belief, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                         const Eigen::VectorXd& y);

/// Normalizes log-weights with a max shift. Throws DegenerateWeights(step) when
/// no entry is finite.
Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_weights, int step,
                                      const char* what = "particle weights");

/// Systematic resampling: `count` indices from a single offset u ~ U[0, 1/count).
/// Throws DegenerateWeights when the weights sum to zero.
std::vector<int> systematic_resample(const Eigen::VectorXd& weights, int count, Rng& rng);
inline std::vector<int> systematic_resample(const Eigen::VectorXd& weights, Rng& rng) {
  return systematic_resample(weights, static_cast<int>(weights.size()), rng);
}

/// Single categorical draw.
int sample_index(const Eigen::VectorXd& weights, Rng& rng);

// ---------------------------------------------------------------------------
// Likelihood of the future measurements along a reference trajectory
// ---------------------------------------------------------------------------

/// Information-form summary of stacked observations (Cbar, Sigmabar) relative to
/// a map mean mu:  A = Cbar^T Sigmabar^-1 Cbar,  z = Cbar^T Sigmabar^-1 r,
/// q = r^T Sigmabar^-1 r  with r = ybar - Cbar mu (or ybar - h(mu) when linearized).
struct FutureInfo {
  Eigen::MatrixXd A;
  Eigen::VectorXd z;
  double q = 0.0;
  Eigen::Index rows = 0;
  double logdet_sigma = 0.0;
  double upper_bound = 0.0;  // >= the log-likelihood for every belief
};

/// log N(ybar; Cbar mu, Cbar P Cbar^T + Sigmabar) from the information summary,
/// using P = B B^T and the matrix determinant lemma on I + B^T A B.
double info_loglik(const Eigen::MatrixXd& P, const FutureInfo& info);

/// Dense stacked evaluation; test oracle.
double future_loglik_dense(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                           const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma);
/// Chain rule: sum of one-step predictive log-likelihoods with updates in between.
double future_loglik_sequential(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                                const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma);
/// Production route (information form).
double future_loglik(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                     const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma);

/// Backward cumulative sums Cbar^T Sigma^-1 Cbar etc. over a reference. Valid
/// for exactly linear sensors, where C does not depend on the map.
struct FutureCache {
  std::vector<Eigen::MatrixXd> A;   // [t] = sum_{tau >= t} C^T Sigma^-1 C
  std::vector<Eigen::VectorXd> b;   // [t] = sum C^T Sigma^-1 y
  std::vector<double> c;            // [t] = sum y^T Sigma^-1 y
  std::vector<Eigen::Index> rows;
  std::vector<double> logdet_sigma;
  std::vector<double> upper_bound;

  FutureInfo at(int t, const Eigen::VectorXd& mu) const;
};

/// Upper bound of a zero-mean Gaussian log-density with covariance Sigma that
/// also holds for any subset of its rows when Sigma is diagonal:
/// sum_r max(0, -(log 2 pi + log Sigma_rr) / 2). For non-diagonal Sigma the
/// bound max(0, -(k log 2 pi + log|Sigma|) / 2) is used. Optionally returns log|Sigma|.
double gaussian_logpdf_bound(const Eigen::MatrixXd& Sigma, double* logdet = nullptr);

template <class Dyn, class Sensor>
FutureCache build_future_cache(const SlamProblem<Dyn, Sensor>& prob, const std::vector<typename Dyn::Pose>& ref) {
  static_assert(Sensor::kConditionallyLinear, "shared future statistics need an exactly linear sensor");
  const int T = prob.steps();
  const Eigen::Index n = prob.prior.dim();
  FutureCache cache;
  cache.A.resize(T + 1);
  cache.b.resize(T + 1);
  cache.c.assign(T + 1, 0.0);
  cache.rows.assign(T + 1, 0);
  cache.logdet_sigma.assign(T + 1, 0.0);
  cache.upper_bound.assign(T + 1, 0.0);
  cache.A[T] = Eigen::MatrixXd::Zero(n, n);
  cache.b[T] = Eigen::VectorXd::Zero(n);
  for (int t = T - 1; t >= 0; --t) {
    const Linearization lin = prob.sensor.linearize(ref[t], prob.prior.mean, prob.measurements[t]);
    cache.A[t] = cache.A[t + 1];
    cache.b[t] = cache.b[t + 1];
    cache.c[t] = cache.c[t + 1];
    cache.rows[t] = cache.rows[t + 1] + lin.rows();
    double logdet = 0.0;
    cache.upper_bound[t] = cache.upper_bound[t + 1] + gaussian_logpdf_bound(lin.noise, &logdet);
    cache.logdet_sigma[t] = cache.logdet_sigma[t + 1] + logdet;
    if (lin.rows() == 0) continue;
    const Eigen::LLT<Eigen::MatrixXd> llt(lin.noise);
    const Eigen::MatrixXd WC = llt.matrixL().solve(lin.C);
    const Eigen::VectorXd wy = llt.matrixL().solve(lin.observed);
    cache.A[t].selfadjointView<Eigen::Lower>().rankUpdate(WC.transpose());
    cache.A[t].triangularView<Eigen::StrictlyUpper>() = cache.A[t].transpose();
    cache.b[t].noalias() += WC.transpose() * wy;
    cache.c[t] += wy.squaredNorm();
  }
  return cache;
}

/// Information summary for a particle whose map mean is `mu`, linearizing every
/// future observation at `mu`. Works for all sensors. Sensors that provide
/// accumulate_information() are summed directly unless `direct` is false.
template <class Dyn, class Sensor>
FutureInfo build_future_info(const SlamProblem<Dyn, Sensor>& prob, const std::vector<typename Dyn::Pose>& ref,
                             int t, const Eigen::VectorXd& mu, bool direct = true) {
  const Eigen::Index n = mu.size();
  FutureInfo f;
  f.A = Eigen::MatrixXd::Zero(n, n);
  f.z = Eigen::VectorXd::Zero(n);
  constexpr bool kDirect = requires(const Sensor& s, FutureInfo& fi) {
    s.accumulate_information(ref[0], mu, prob.measurements[0], fi.A, fi.z, fi.q, fi.rows, fi.logdet_sigma,
                             fi.upper_bound);
  };
  if constexpr (kDirect) {
    if (direct) {
      for (int tau = t; tau < prob.steps(); ++tau)
        prob.sensor.accumulate_information(ref[tau], mu, prob.measurements[tau], f.A, f.z, f.q, f.rows,
                                           f.logdet_sigma, f.upper_bound);
      return f;
    }
  }
  for (int tau = t; tau < prob.steps(); ++tau) {
    const Linearization lin = prob.sensor.linearize(ref[tau], mu, prob.measurements[tau]);
    double logdet = 0.0;
    f.upper_bound += gaussian_logpdf_bound(lin.noise, &logdet);
    f.logdet_sigma += logdet;
    f.rows += lin.rows();
    if (lin.rows() == 0) continue;
    const Eigen::LLT<Eigen::MatrixXd> llt(lin.noise);
    const Eigen::VectorXd wr = llt.matrixL().solve(lin.residual());
    f.q += wr.squaredNorm();
    if (lin.columns.empty()) {
      const Eigen::MatrixXd WC = llt.matrixL().solve(lin.C);
      f.A.selfadjointView<Eigen::Lower>().rankUpdate(WC.transpose());
      f.z.noalias() += WC.transpose() * wr;
    } else {
      const Eigen::MatrixXd WC = llt.matrixL().solve(lin.C(Eigen::all, lin.columns));
      const Eigen::MatrixXd G = WC.transpose() * WC;
      const Eigen::VectorXd g = WC.transpose() * wr;
      for (std::size_t a = 0; a < lin.columns.size(); ++a) {
        f.z[lin.columns[a]] += g[a];
        for (std::size_t b = 0; b < lin.columns.size(); ++b)
          if (lin.columns[a] >= lin.columns[b]) f.A(lin.columns[a], lin.columns[b]) += G(a, b);
      }
    }
  }
  f.A.triangularView<Eigen::StrictlyUpper>() = f.A.transpose();
  return f;
}

// ---------------------------------------------------------------------------
// Particle storage
// ---------------------------------------------------------------------------

template <class Pose>
struct ParticleHistory {
  std::vector<std::vector<Pose>> poses;      // [t][i]
  std::vector<std::vector<int>> ancestors;   // [t][i], index at t - 1; identity at t = 0
  std::vector<Eigen::VectorXd> weights;      // [t], normalized after weighting step t

  int steps() const { return static_cast<int>(poses.size()); }
  int particles() const { return poses.empty() ? 0 : static_cast<int>(poses.front().size()); }

  /// Lineage of particle `index` at the final step.
  std::vector<Pose> trajectory(int index) const {
    std::vector<Pose> out(poses.size());
    int j = index;
    for (int t = steps() - 1; t >= 0; --t) {
      out[t] = poses[t][j];
      j = ancestors[t][j];
    }
    return out;
  }
};

template <class Pose>
struct FilterResult {
  ParticleHistory<Pose> history;
  std::vector<GaussianMapBelief> beliefs;  // final conditional map posteriors
  int dropped_rows = 0;
  long ancestor_evaluations = 0;  // future-likelihood evaluations actually performed
  long ancestor_pruned = 0;       // candidates skipped as unreachable or negligible
};

template <class Pose>
struct SmootherSample {
  int k = 0;
  std::vector<Pose> trajectory;
  Eigen::VectorXd theta;  // draw from the conditional map posterior
  GaussianMapBelief map;  // that posterior (mean and covariance)
};

template <class Pose>
struct SmootherResult {
  FilterResult<Pose> initial_filter;  // the RBPF-AS run that seeds the chain
  std::vector<Pose> initial_reference;
  std::vector<SmootherSample<Pose>> samples;
};

struct FilterOptions {
  ExecPolicy policy = ExecPolicy::serial;
  /// Ancestor candidates whose log-weight upper bound lies this far below the
  /// best exactly evaluated candidate are given zero probability. Values >= 700
  /// keep every candidate that is representable in double precision.
  double prune_log_ratio = 50.0;
  /// Use the shared backward sums for exactly linear sensors.
  bool shared_future_cache = true;
};

// ---------------------------------------------------------------------------
// Filter core
// ---------------------------------------------------------------------------

namespace detail {

/// Weights the particles at step t against measurement t and updates each map
/// in place. Returns the log-weights.
template <class Dyn, class Sensor>
Eigen::VectorXd weight_and_update(const SlamProblem<Dyn, Sensor>& prob, int t,
                                  const std::vector<typename Dyn::Pose>& poses, std::vector<GaussianMapBelief>& beliefs,
                                  ExecPolicy policy, int& dropped) {
  const int N = static_cast<int>(poses.size());
  Eigen::VectorXd logw(N);
  std::vector<int> drops(N, 0);
  for_each_index(policy, N, [&](std::ptrdiff_t i) {
    const Linearization lin = prob.sensor.linearize(poses[i], beliefs[i].mean, prob.measurements[t]);
    drops[i] = lin.dropped;
    logw[i] = condition_belief(beliefs[i], lin.C, lin.noise, lin.residual(), lin.columns);
  });
  dropped += std::accumulate(drops.begin(), drops.end(), 0);
  return logw;
}

/// Rebuilds the belief vector from ancestor indices, moving each source on its
/// last use instead of copying it.
inline std::vector<GaussianMapBelief> gather_beliefs(std::vector<GaussianMapBelief>& src,
                                                     const std::vector<int>& ancestors) {
  std::vector<int> last_use(src.size(), -1);
  for (std::size_t i = 0; i < ancestors.size(); ++i) last_use[ancestors[i]] = static_cast<int>(i);
  std::vector<GaussianMapBelief> out(ancestors.size());
  for (std::size_t i = 0; i < ancestors.size(); ++i) {
    const int a = ancestors[i];
    if (last_use[a] == static_cast<int>(i))
      out[i] = std::move(src[a]);
    else
      out[i] = src[a];
  }
  return out;
}

template <class Error_>
[[noreturn]] void rethrow_with_step(const Error_& e, int step) {
  throw Error_(std::string(e.what()) + " (step " + std::to_string(step) + ")");
}

}  // namespace detail

/// suffix[t] bounds the log-likelihood of measurements t..T-1 from above for
/// any map belief: sum over rows of max(0, -(log 2 pi + log sigma_rr^2) / 2).
template <class Dyn, class Sensor>
std::vector<double> future_bounds(const SlamProblem<Dyn, Sensor>& prob) {
  std::vector<double> suffix(prob.steps() + 1, 0.0);
  for (int t = prob.steps() - 1; t >= 0; --t)
    suffix[t] = suffix[t + 1] + gaussian_logpdf_bound(prob.sensor.noise_for(prob.measurements[t]));
  return suffix;
}

/// Ancestor log-weights of the reference state ref[t] (t >= 1, 0-based):
///   log w_{t-1}^i + log p(ref[t] | x_{t-1}^i) + log p(y_{t:T} | particle i, ref[t:T]).
/// Entries that are unreachable under the dynamics or pruned are -inf.
template <class Dyn, class Sensor>
Eigen::VectorXd ancestor_log_weights(const SlamProblem<Dyn, Sensor>& prob, int t,
                                     const std::vector<typename Dyn::Pose>& prev_poses,
                                     const std::vector<GaussianMapBelief>& beliefs, const Eigen::VectorXd& prev_weights,
                                     const std::vector<typename Dyn::Pose>& ref, const FutureCache* cache,
                                     const std::vector<double>& suffix_bound, const FilterOptions& opt, long* evaluated = nullptr, long* pruned = nullptr) {
  const int N = static_cast<int>(prev_poses.size());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd head(N);  // log w + log transition
  for (int i = 0; i < N; ++i) {
    head[i] = prev_weights[i] > 0.0
                  ? std::log(prev_weights[i]) + prob.dynamics.log_transition(prev_poses[i], prob.odometry[t - 1], ref[t])
                  : kNegInf;
  }

  auto future = [&](int i) {
    if (cache != nullptr) return info_loglik(beliefs[i].cov, cache->at(t, beliefs[i].mean));
    return info_loglik(beliefs[i].cov, build_future_info(prob, ref, t, beliefs[i].mean));
  };
  Eigen::VectorXd out = Eigen::VectorXd::Constant(N, kNegInf);
  Eigen::Index best_idx = 0;
  const double best_head = head.maxCoeff(&best_idx);
  if (!std::isfinite(best_head)) return out;
  // A single reachable candidate is drawn with probability one whatever its
  // future likelihood, so that likelihood is not evaluated.
  const auto reachable = (head.array() > kNegInf).count();
  if (reachable == 1) {
    if (pruned) *pruned += N - 1;
    return head;
  }

  out[best_idx] = best_head + future(static_cast<int>(best_idx));
  long n_eval = 1;
  const double threshold = out[best_idx] - opt.prune_log_ratio;
  const double ub = suffix_bound[t];

  std::vector<int> todo;
  long n_pruned = 0;
  for (int i = 0; i < N; ++i) {
    if (i == best_idx) continue;
    if (!std::isfinite(head[i]) || head[i] + ub < threshold) {
      ++n_pruned;
      continue;
    }
    todo.push_back(i);
  }
  for_each_index(opt.policy, static_cast<std::ptrdiff_t>(todo.size()), [&](std::ptrdiff_t k) {
    const int i = todo[k];
    out[i] = head[i] + future(i);
  });
  n_eval += static_cast<long>(todo.size());
  if (evaluated) *evaluated += n_eval;
  if (pruned) *pruned += n_pruned;
  return out;
}

/// Runs the (conditional) Rao-Blackwellized particle filter with ancestor
/// sampling. With `reference == nullptr` this is the plain RBPF-AS; otherwise
/// particle N - 1 follows the reference and draws its ancestors.
template <class Dyn, class Sensor>
FilterResult<typename Dyn::Pose> run_rbpf(const SlamProblem<Dyn, Sensor>& prob, int N, const SeedStream& seeds,
                                          const std::vector<typename Dyn::Pose>* reference,
                                          const FilterOptions& opt = {}) {
  using Pose = typename Dyn::Pose;
  prob.validate();
  const int T = prob.steps();
  if (N < 1) throw Error("need at least one particle");
  if (reference != nullptr) {
    if (N < 2) throw Error("the conditional filter needs at least two particles");
    if (static_cast<int>(reference->size()) != T) throw LengthMismatch("reference length does not match the data");
  }
  const int free = reference ? N - 1 : N;

  FilterResult<Pose> res;
  auto& H = res.history;
  H.poses.resize(T);
  H.ancestors.resize(T);
  H.weights.resize(T);

  std::optional<FutureCache> cache;
  std::vector<double> bounds;
  if (reference) {
    bounds = future_bounds(prob);
    if constexpr (Sensor::kConditionallyLinear) {
      if (opt.shared_future_cache) cache = build_future_cache(prob, *reference);
    }
  }

  std::vector<GaussianMapBelief> beliefs(N, prob.prior);
  H.poses[0].assign(N, prob.x0);
  if (reference) H.poses[0][N - 1] = (*reference)[0];
  H.ancestors[0].resize(N);
  std::iota(H.ancestors[0].begin(), H.ancestors[0].end(), 0);

  for (int t = 0; t < T; ++t) {
    try {
      if (t > 0) {
        Rng rs = seeds.child({stream_tag::kResample, static_cast<std::uint64_t>(t)}).engine();
        std::vector<int> anc = systematic_resample(H.weights[t - 1], free, rs);
        std::vector<Pose> poses(N);
        const auto& prev = H.poses[t - 1];
        const auto& odo = prob.odometry[t - 1];
        for_each_index(opt.policy, free, [&](std::ptrdiff_t i) {
          Rng r = seeds.child({stream_tag::kPropagate, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)})
                      .engine();
          poses[i] = prob.dynamics.propagate(prev[anc[i]], odo, r);
        });
        if (reference) {
          const Eigen::VectorXd lw =
              ancestor_log_weights(prob, t, prev, beliefs, H.weights[t - 1], *reference, cache ? &*cache : nullptr,
                                   bounds, opt, &res.ancestor_evaluations, &res.ancestor_pruned);
          const Eigen::VectorXd p = normalize_log_weights(lw, t + 1, "ancestor weights");
          Rng ra = seeds.child({stream_tag::kAncestor, static_cast<std::uint64_t>(t)}).engine();
          anc.push_back(sample_index(p, ra));
          poses[N - 1] = (*reference)[t];
        }
        beliefs = detail::gather_beliefs(beliefs, anc);
        H.poses[t] = std::move(poses);
        H.ancestors[t] = std::move(anc);
      }
      const Eigen::VectorXd logw =
          detail::weight_and_update(prob, t, H.poses[t], beliefs, opt.policy, res.dropped_rows);
      H.weights[t] = normalize_log_weights(logw, t + 1);
    } catch (const SingularInnovation& e) {
      detail::rethrow_with_step(e, t + 1);
    }
  }
  res.beliefs = std::move(beliefs);
  return res;
}

template <class Dyn, class Sensor>
FilterResult<typename Dyn::Pose> rbpf_as_run(const SlamProblem<Dyn, Sensor>& prob, int N, const SeedStream& seeds,
                                             const FilterOptions& opt = {}) {
  return run_rbpf(prob, N, seeds, nullptr, opt);
}

/// Draws the output trajectory index J ~ w_T and a map theta ~ N(mean_J, P_J).
template <class Pose>
SmootherSample<Pose> draw_sample(const FilterResult<Pose>& res, const SeedStream& seeds, int k) {
  Rng r = seeds.child(stream_tag::kFinalDraw).engine();
  const int J = sample_index(res.history.weights.back(), r);
  SmootherSample<Pose> s;
  s.k = k;
  s.trajectory = res.history.trajectory(J);
  s.map = res.beliefs[J];
  s.theta = s.map.mean + sample_gaussian(s.map.cov, r);
  return s;
}

/// One iteration of the conditional RBPF with ancestor sampling.
template <class Dyn, class Sensor>
SmootherSample<typename Dyn::Pose> crbpf_as_run(const SlamProblem<Dyn, Sensor>& prob, int N, const SeedStream& seeds,
                                                const std::vector<typename Dyn::Pose>& reference, int k = 0,
                                                const FilterOptions& opt = {},
                                                FilterResult<typename Dyn::Pose>* filter_out = nullptr) {
  FilterResult<typename Dyn::Pose> res = run_rbpf(prob, N, seeds, &reference, opt);
  SmootherSample<typename Dyn::Pose> s = draw_sample(res, seeds, k);
  if (filter_out) *filter_out = std::move(res);
  return s;
}

/// MCMC smoother: K conditional runs, each conditioned on the previous sample.
/// The chain starts from a trajectory drawn from an RBPF-AS run; nothing is
/// discarded as burn-in.
template <class Dyn, class Sensor>
SmootherResult<typename Dyn::Pose> mcmc_smoother_run(const SlamProblem<Dyn, Sensor>& prob, int N, int K,
                                                     const SeedStream& seeds, const FilterOptions& opt = {}) {
  if (K < 1) throw Error("need at least one smoother sample");
  SmootherResult<typename Dyn::Pose> out;
  const SeedStream init = seeds.child(0);
  out.initial_filter = rbpf_as_run(prob, N, init, opt);
  out.initial_reference = draw_sample(out.initial_filter, init, 0).trajectory;
  const std::vector<typename Dyn::Pose>* ref = &out.initial_reference;
  out.samples.reserve(K);
  for (int k = 1; k <= K; ++k) {
    out.samples.push_back(crbpf_as_run(prob, N, seeds.child(static_cast<std::uint64_t>(k)), *ref, k, opt));
    ref = &out.samples.back().trajectory;
  }
  return out;
}

/// Particle filter localization in a known (fixed) map. `initial` holds one pose
/// per particle, so arbitrary (multimodal) initial clouds are supported.
template <class Dyn, class Sensor>
ParticleHistory<typename Dyn::Pose> localize_known_map(const SlamProblem<Dyn, Sensor>& prob,
                                                       const std::vector<typename Dyn::Pose>& initial,
                                                       const SeedStream& seeds, ExecPolicy policy = ExecPolicy::serial) {
  using Pose = typename Dyn::Pose;
  prob.validate();
  const int N = static_cast<int>(initial.size());
  if (N < 1) throw Error("need at least one particle");
  const int T = prob.steps();
  const bool certain = prob.prior.cov.isZero(0.0);
  ParticleHistory<Pose> H;
  H.poses.resize(T);
  H.ancestors.resize(T);
  H.weights.resize(T);
  H.poses[0] = initial;
  H.ancestors[0].resize(N);
  std::iota(H.ancestors[0].begin(), H.ancestors[0].end(), 0);
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      Rng rs = seeds.child({stream_tag::kResample, static_cast<std::uint64_t>(t)}).engine();
      H.ancestors[t] = systematic_resample(H.weights[t - 1], rs);
      H.poses[t].resize(N);
      for_each_index(policy, N, [&](std::ptrdiff_t i) {
        Rng r = seeds.child({stream_tag::kPropagate, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)})
                    .engine();
        H.poses[t][i] = prob.dynamics.propagate(H.poses[t - 1][H.ancestors[t][i]], prob.odometry[t - 1], r);
      });
    }
    Eigen::VectorXd logw(N);
    for_each_index(policy, N, [&](std::ptrdiff_t i) {
      const Linearization lin = prob.sensor.linearize(H.poses[t][i], prob.prior.mean, prob.measurements[t]);
      if (lin.rows() == 0) {
        logw[i] = 0.0;
      } else if (certain) {
        const auto llt = factor_innovation(lin.noise);
        const Eigen::VectorXd w = llt.matrixL().solve(lin.residual());
        logw[i] = -0.5 * (static_cast<double>(lin.rows()) * 1.8378770664093453 +
                          2.0 * llt.matrixLLT().diagonal().array().log().sum() + w.squaredNorm());
      } else {
        GaussianMapBelief b = prob.prior;
        logw[i] = condition_belief(b, lin.C, lin.noise, lin.residual(), lin.columns, false);
      }
    });
    H.weights[t] = normalize_log_weights(logw, t + 1);
  }
  return H;
}

// ---------------------------------------------------------------------------
// Point estimates from particle histories
// ---------------------------------------------------------------------------

/// Weighted mean of the marginal filtering positions at every step.
template <class Dyn>
std::vector<Eigen::VectorXd> weighted_mean_positions(const ParticleHistory<typename Dyn::Pose>& H) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(H.steps());
  for (int t = 0; t < H.steps(); ++t) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(Dyn::kSpatialDim);
    for (int i = 0; i < H.particles(); ++i) m += H.weights[t][i] * Dyn::position(H.poses[t][i]);
    out.push_back(m);
  }
  return out;
}

/// Weighted circular mean of the yaw angle at every step.
template <class Dyn>
std::vector<double> weighted_mean_yaw(const ParticleHistory<typename Dyn::Pose>& H) {
  std::vector<double> out;
  out.reserve(H.steps());
  for (int t = 0; t < H.steps(); ++t) {
    double s = 0.0, c = 0.0;
    for (int i = 0; i < H.particles(); ++i) {
      const double h = Dyn::yaw(H.poses[t][i]);
      s += H.weights[t][i] * std::sin(h);
      c += H.weights[t][i] * std::cos(h);
    }
    out.push_back(std::atan2(s, c));
  }
  return out;
}

template <class Dyn>
std::vector<Eigen::VectorXd> positions_of(const std::vector<typename Dyn::Pose>& traj) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(Dyn::position(p));
  return out;
}

template <class Dyn>
std::vector<double> yaw_of(const std::vector<typename Dyn::Pose>& traj) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& p : traj) out.push_back(Dyn::yaw(p));
  return out;
}

}  // namespace rbslam

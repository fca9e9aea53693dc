#include "rbslam/inference.hpp"

#include <Eigen/Cholesky>

namespace rbslam {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

double predictive_loglik(const GaussianMapBelief& belief, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Sigma,
                         const Eigen::VectorXd& y) {
  GaussianMapBelief b = belief;
  return condition_belief(b, C, Sigma, y - C * belief.mean, {}, false);
}

Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& logw, int step, const char* what) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw)
    if (!std::isnan(v)) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw DegenerateWeights(std::string(what) + " vanished", step);
  Eigen::VectorXd w(logw.size());
  for (Eigen::Index i = 0; i < logw.size(); ++i) w[i] = std::isnan(logw[i]) ? 0.0 : std::exp(logw[i] - mx);
  return w / w.sum();
}

std::vector<int> systematic_resample(const Eigen::VectorXd& weights, int count, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateWeights("resampling weights sum to zero", 0);
  std::vector<int> out(count);
  if (count == 0) return out;
  std::uniform_real_distribution<double> unif(0.0, 1.0 / count);
  const double u = unif(rng);
  const Eigen::Index n = weights.size();
  double cum = weights[0] / total;
  Eigen::Index j = 0;
  for (int k = 0; k < count; ++k) {
    const double level = u + static_cast<double>(k) / count;
    while (level > cum && j + 1 < n) cum += weights[++j] / total;
    out[k] = static_cast<int>(j);
  }
  return out;
}

int sample_index(const Eigen::VectorXd& weights, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw DegenerateWeights("categorical weights sum to zero", 0);
  std::uniform_real_distribution<double> unif(0.0, total);
  const double u = unif(rng);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return static_cast<int>(i);
  }
  // Round-off at the top of the ladder: last index with positive weight.
  for (Eigen::Index i = weights.size() - 1; i >= 0; --i)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return 0;
}

double gaussian_logpdf_bound(const Eigen::MatrixXd& Sigma, double* logdet) {
  const Eigen::Index k = Sigma.rows();
  if (k == 0) {
    if (logdet) *logdet = 0.0;
    return 0.0;
  }
  const bool diagonal = Sigma.isDiagonal(0.0);
  double ld = 0.0;
  double bound = 0.0;
  if (diagonal) {
    for (Eigen::Index r = 0; r < k; ++r) {
      const double l = std::log(Sigma(r, r));
      ld += l;
      bound += std::max(0.0, -0.5 * (kLog2Pi + l));
    }
  } else {
    const Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    ld = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    bound = std::max(0.0, -0.5 * (static_cast<double>(k) * kLog2Pi + ld));
  }
  if (logdet) *logdet = ld;
  return bound;
}

FutureInfo FutureCache::at(int t, const Eigen::VectorXd& mu) const {
  FutureInfo f;
  f.A = A[t];
  f.z = b[t] - A[t] * mu;
  f.q = c[t] - 2.0 * b[t].dot(mu) + mu.dot(A[t] * mu);
  f.rows = rows[t];
  f.logdet_sigma = logdet_sigma[t];
  f.upper_bound = upper_bound[t];
  return f;
}

double info_loglik(const Eigen::MatrixXd& P, const FutureInfo& f) {
  if (f.rows == 0) return 0.0;
  const Eigen::Index n = P.rows();
  // P = B B^T from a pivoted LDL^T; tiny negative pivots from round-off are clipped.
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
  Eigen::MatrixXd B = ldlt.matrixL();
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  B = B * d.asDiagonal();
  B = ldlt.transpositionsP().transpose() * B;

  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd AB = f.A * B;
  M.noalias() += B.transpose() * AB;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw SingularInnovation("future likelihood: I + B^T A B not positive definite");
  const Eigen::VectorXd w = B.transpose() * f.z;
  const double quad = f.q - llt.matrixL().solve(w).squaredNorm();
  const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(f.rows) * kLog2Pi + f.logdet_sigma + logdet_m + std::max(quad, 0.0));
}

double future_loglik_dense(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                           const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma) {
  if (Cs.size() != ys.size()) throw LengthMismatch("future_loglik: C and y sequences differ in length");
  Eigen::Index rows = 0;
  for (const auto& C : Cs) rows += C.rows();
  Eigen::MatrixXd Cbar(rows, belief.dim());
  Eigen::VectorXd ybar(rows);
  Eigen::MatrixXd Sbar = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < Cs.size(); ++k) {
    const Eigen::Index m = Cs[k].rows();
    Cbar.middleRows(r, m) = Cs[k];
    ybar.segment(r, m) = ys[k];
    Sbar.block(r, r, m, m) = Sigma;
    r += m;
  }
  GaussianMapBelief b = belief;
  return condition_belief(b, Cbar, Sbar, ybar - Cbar * belief.mean, {}, false);
}

double future_loglik_sequential(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                                const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma) {
  if (Cs.size() != ys.size()) throw LengthMismatch("future_loglik: C and y sequences differ in length");
  GaussianMapBelief b = belief;
  double total = 0.0;
  for (std::size_t k = 0; k < Cs.size(); ++k) total += condition_belief(b, Cs[k], Sigma, ys[k] - Cs[k] * b.mean);
  return total;
}

double future_loglik(const GaussianMapBelief& belief, const std::vector<Eigen::MatrixXd>& Cs,
                     const std::vector<Eigen::VectorXd>& ys, const Eigen::MatrixXd& Sigma) {
  if (Cs.size() != ys.size()) throw LengthMismatch("future_loglik: C and y sequences differ in length");
  const Eigen::Index n = belief.dim();
  FutureInfo f;
  f.A = Eigen::MatrixXd::Zero(n, n);
  f.z = Eigen::VectorXd::Zero(n);
  const Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  double logdet = 0.0;
  gaussian_logpdf_bound(Sigma, &logdet);
  for (std::size_t k = 0; k < Cs.size(); ++k) {
    const Eigen::MatrixXd WC = llt.matrixL().solve(Cs[k]);
    const Eigen::VectorXd wr = llt.matrixL().solve(ys[k] - Cs[k] * belief.mean);
    f.A.selfadjointView<Eigen::Lower>().rankUpdate(WC.transpose());
    f.z.noalias() += WC.transpose() * wr;
    f.q += wr.squaredNorm();
    f.rows += Cs[k].rows();
    f.logdet_sigma += logdet;
  }
  f.A.triangularView<Eigen::StrictlyUpper>() = f.A.transpose();
  return info_loglik(belief.cov, f);
}

}  // namespace rbslam

#include "rbslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/SVD>

#include "rbslam/errors.hpp"
#include "rbslam/geometry.hpp"

namespace rbslam {

double rmse(const std::vector<Eigen::VectorXd>& est, const std::vector<Eigen::VectorXd>& truth) {
  if (est.size() != truth.size()) throw LengthMismatch("rmse: sequences differ in length");
  if (est.empty()) throw LengthMismatch("rmse: empty sequences");
  double acc = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (est[t].size() != truth[t].size()) throw LengthMismatch("rmse: dimension mismatch");
    acc += (est[t] - truth[t]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(est.size()));
}

std::vector<Eigen::VectorXd> AlignmentResult::apply(const std::vector<Eigen::VectorXd>& xs) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(apply(x));
  return out;
}

AlignmentResult procrustes_align(const std::vector<Eigen::VectorXd>& src, const std::vector<Eigen::VectorXd>& dst,
                                 bool with_scale) {
  if (src.size() != dst.size()) throw LengthMismatch("procrustes: point sets differ in size");
  if (src.size() < 2) throw Error("procrustes: need at least two point pairs");
  const Eigen::Index d = src.front().size();
  const Eigen::Index n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd X(d, n), Y(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.col(i) = src[i];
    Y.col(i) = dst[i];
  }
  const Eigen::VectorXd mx = X.rowwise().mean(), my = Y.rowwise().mean();
  X.colwise() -= mx;
  Y.colwise() -= my;
  const double var_x = X.squaredNorm() / static_cast<double>(n);
  if (!(var_x > 1e-24)) throw Error("procrustes: source points are coincident");

  const Eigen::MatrixXd Sxy = Y * X.transpose() / static_cast<double>(n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Sxy, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::VectorXd s = Eigen::VectorXd::Ones(d);
  if ((svd.matrixU().determinant() * svd.matrixV().determinant()) < 0.0) s[d - 1] = -1.0;

  AlignmentResult r;
  r.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  r.scale = with_scale ? svd.singularValues().dot(s) / var_x : 1.0;
  r.translation = my - r.scale * r.rotation * mx;
  r.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) r.residuals[i] = (dst[i] - r.apply(src[i])).norm();
  return r;
}

std::vector<int> unique_ancestor_profile(const std::vector<std::vector<int>>& ancestors) {
  const int T = static_cast<int>(ancestors.size());
  std::vector<int> out(T, 0);
  if (T == 0) return out;
  std::vector<int> current(ancestors.back().size());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = static_cast<int>(i);
  for (int t = T - 1; t >= 0; --t) {
    std::set<int> uniq(current.begin(), current.end());
    out[t] = static_cast<int>(uniq.size());
    if (t == 0) break;
    std::vector<int> prev;
    prev.reserve(uniq.size());
    for (int i : uniq) prev.push_back(ancestors[t][i]);
    current = std::move(prev);
  }
  return out;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) throw Error("quantile of empty data");
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BoxStats mc_aggregate(std::vector<double> values) {
  if (values.empty()) throw Error("mc_aggregate: no values");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.count = values.size();
  b.median = quantile_sorted(values, 0.5);
  b.q1 = quantile_sorted(values, 0.25);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = b.q1;
  b.whisker_high = b.q3;
  bool have_low = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    if (!have_low) {
      b.whisker_low = v;
      have_low = true;
    }
    b.whisker_high = v;
  }
  return b;
}

double mean_sq_second_difference(const std::vector<double>& a, const std::vector<int>& skip_increments) {
  if (a.size() < 3) return 0.0;
  std::vector<char> skip(a.size(), 0);
  for (int t : skip_increments)
    if (t >= 0 && static_cast<std::size_t>(t) < a.size()) skip[t] = 1;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t + 1 < a.size(); ++t) {
    if (skip[t - 1] || skip[t]) continue;
    const double d = wrap_angle(wrap_angle(a[t + 1] - a[t]) - wrap_angle(a[t] - a[t - 1]));
    acc += d * d;
    ++count;
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

}  // namespace rbslam

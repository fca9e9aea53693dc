#pragma once

#include <vector>

#include <Eigen/Core>

namespace rbslam {

/// Root mean squared Euclidean error between two equally long position sequences.
double rmse(const std::vector<Eigen::VectorXd>& estimate, const std::vector<Eigen::VectorXd>& truth);

/// Similarity transform target ~ scale * R * source + t.
struct AlignmentResult {
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;
  double scale = 1.0;
  Eigen::VectorXd residuals;  // per-point distances after alignment

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return scale * rotation * x + translation; }
  std::vector<Eigen::VectorXd> apply(const std::vector<Eigen::VectorXd>& xs) const;
};

/// Least-squares similarity (Umeyama). Throws Error when the source points are
/// all coincident or fewer than two pairs are given.
AlignmentResult procrustes_align(const std::vector<Eigen::VectorXd>& source, const std::vector<Eigen::VectorXd>& target,
                                 bool with_scale = true);

/// ancestors[t][i] is the index at t - 1 of particle i at t (ancestors[0] unused).
/// Returns, for each t, the number of distinct time-t ancestors of the final
/// particle set.
std::vector<int> unique_ancestor_profile(const std::vector<std::vector<int>>& ancestors);

/// Tukey box statistics with type-7 quartiles and 1.5 IQR whiskers.
struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
  std::size_t count = 0;
};

BoxStats mc_aggregate(std::vector<double> values);

/// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Mean over steps of the squared second difference of a (wrapped) angle sequence.
/// Mean squared wrapped second difference of an angle sequence. Second
/// differences that involve an increment listed in `skip_increments` (index t
/// meaning angles[t] -> angles[t+1]) are left out of the mean.
double mean_sq_second_difference(const std::vector<double>& angles, const std::vector<int>& skip_increments = {});

}  // namespace rbslam

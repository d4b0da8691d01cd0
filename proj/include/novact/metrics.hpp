#pragma once

#include "novact/codec.hpp"
#include "novact/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace novact {

/// Euclidean distance between row i of `a` and row j of `b`, summed in
/// column order.
template <typename DA, typename DB>
typename DA::Scalar frame_distance(const Eigen::MatrixBase<DA>& a, Eigen::Index i,
                                   const Eigen::MatrixBase<DB>& b, Eigen::Index j) {
  using Scalar = typename DA::Scalar;
  Scalar sum(0);
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const Scalar diff = a(i, d) - b(j, d);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

/// Unconstrained dynamic time warping between two time-major sequences with
/// Euclidean frame cost:
/// D(i,j) = cost(i,j) + min(D(i-1,j), D(i,j-1), D(i-1,j-1)).
template <typename DA, typename DB>
typename DA::Scalar dtw_distance(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  require(a.cols() == b.cols(), ErrorKind::DimensionMismatch,
          "DTW inputs have different joint counts");
  require(a.rows() >= 1 && b.rows() >= 1, ErrorKind::DimensionMismatch,
          "DTW inputs must have at least one frame");
  const Eigen::Index n = a.rows(), m = b.rows();
  std::vector<Scalar> prev(static_cast<std::size_t>(m)), cur(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Scalar cost = frame_distance(a, i, b, j);
      const auto sj = static_cast<std::size_t>(j);
      if (i == 0 && j == 0) {
        cur[sj] = cost;
      } else if (i == 0) {
        cur[sj] = cost + cur[sj - 1];
      } else if (j == 0) {
        cur[sj] = cost + prev[sj];
      } else {
        cur[sj] = cost + std::min({prev[sj], cur[sj - 1], prev[sj - 1]});
      }
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<std::size_t>(m - 1)];
}

inline double dtw_distance(const JointTrajectory& a, const JointTrajectory& b) {
  return dtw_distance(a.values, b.values);
}

/// DTW settings are fixed; the struct exists so reports can echo them.
struct DtwConfig {
  static constexpr std::string_view kLocalDistance = "euclidean";
  static constexpr std::string_view kWindow = "none";
};

struct AppropriatenessRule {
  double velocity_limit = 0.0;     // rad/step
  VectorX<double> movement_floor;  // per joint, rad

  static constexpr double kVelocityFactor = 1.5;
  static constexpr double kMovementFraction = 0.05;

  /// 150% of the training maximum per-step change, and 5% of each joint's
  /// training range as the non-moving floor.
  static AppropriatenessRule from_stats(const TrainingStats& stats,
                                        double velocity_factor = kVelocityFactor,
                                        double movement_fraction = kMovementFraction);
};

enum class PatternClass { AppropriateUnlearned, AppropriateLearned, Fluctuating, NonMoving };

inline constexpr std::array<PatternClass, 4> kAllClasses{
    PatternClass::AppropriateLearned, PatternClass::AppropriateUnlearned, PatternClass::Fluctuating,
    PatternClass::NonMoving};

std::string_view to_string(PatternClass c) noexcept;
std::optional<PatternClass> parse_pattern_class(std::string_view text) noexcept;

inline bool is_appropriate(PatternClass c) {
  return c == PatternClass::AppropriateLearned || c == PatternClass::AppropriateUnlearned;
}

struct PatternLabel {
  PatternClass cls = PatternClass::NonMoving;
  std::optional<std::string> nearest;  // set iff appropriate
  std::optional<double> min_dtw;       // set iff appropriate
};

struct NearestPattern {
  std::size_t index = 0;
  double distance = 0.0;
};

NearestPattern nearest_training_pattern(const JointTrajectory& traj, const TrainingSet& training);

/// 25% of the smallest DTW distance between two distinct training patterns.
double default_learned_threshold(const TrainingSet& training);

PatternLabel classify_pattern(const JointTrajectory& traj, const AppropriatenessRule& rule,
                              const TrainingSet& training, double learned_threshold);

struct ResampleConfig {
  int iterations = 30;
  int sample_size = 30;
  std::uint64_t seed = 1;
};

struct ResampledStat {
  double mean = 0.0;
  double stdev = 0.0;  // across iterations, n - 1 denominator
};

/// Index sets for each iteration: `sample_size` distinct indices from [0, pool).
std::vector<std::vector<std::size_t>> draw_samples(std::size_t pool, const ResampleConfig& cfg);

/// Mean over sampled patterns of their minimum DTW to the training set.
ResampledStat novelty(std::span<const JointTrajectory> generated, const TrainingSet& training,
                      const ResampleConfig& cfg);

/// Same estimator from precomputed per-pattern minimum distances.
ResampledStat novelty_from_distances(std::span<const double> min_dtw, const ResampleConfig& cfg);

/// Mean pairwise DTW among sampled patterns.
ResampledStat diversity(std::span<const JointTrajectory> generated, const ResampleConfig& cfg);

/// Same estimator with patterns fetched on demand by pool index; each index
/// is fetched at most once.
ResampledStat diversity(std::size_t pool, const std::function<JointTrajectory(std::size_t)>& fetch,
                        const ResampleConfig& cfg, int threads = 1);

}  // namespace novact

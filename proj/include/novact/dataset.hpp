#pragma once

#include "novact/codec.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace novact {

/// Labeled training trajectories sharing one joint layout.
struct TrainingSet {
  std::vector<JointTrajectory> patterns;  // JointTrajectory::name is the label
  std::vector<std::string> joint_names;
  double sample_period_s = 0.05;

  Eigen::Index joints() const { return static_cast<Eigen::Index>(joint_names.size()); }
  std::vector<std::string> labels() const;

  /// Throws InvalidArgument / InconsistentDims / NonFinite on violation.
  void validate() const;
};

/// Joint order used by the synthetic set: right arm then left arm.
const std::vector<std::string>& arm_joint_names();

/// The six boxing actions, in training order.
const std::vector<std::string>& boxing_labels();

struct SynthConfig {
  int steps = 50;
  std::vector<double> amplitudes = std::vector<double>(6, 1.0);
  double noise = 0.005;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Six stylized boxing actions (left jab, right straight, left/right hook,
/// left/right uppercut). Every action leaves from and returns to the shared
/// guard posture; noise is tapered to zero at both ends.
TrainingSet synthesize_boxing_set(const SynthConfig& cfg);

/// Guard posture all synthetic actions start and end in.
VectorX<double> guard_posture();

TrainingSet load_training_set(const std::filesystem::path& manifest);

/// Writes one CSV per pattern plus `manifest.json` into `dir`.
void save_training_set(const TrainingSet& set, const std::filesystem::path& dir);

JointTrajectory read_trajectory_csv(const std::filesystem::path& file, std::string label = {});
void write_trajectory_csv(const JointTrajectory& traj, const std::vector<std::string>& joint_names,
                          const std::filesystem::path& file);

struct TrainingStats {
  VectorX<double> min;
  VectorX<double> max;
  VectorX<double> home;  // mean of the first frames
  double max_velocity = 0.0;  // largest |x_{t+1} - x_t| over all joints and patterns, rad/step
  int max_steps = 0;

  VectorX<double> range() const { return max - min; }
};

TrainingStats training_stats(const TrainingSet& set);

}  // namespace novact

#pragma once

#include "novact/metrics.hpp"
#include "novact/trainer.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace novact {

/// Square grid over [-1, 1]^2 in PB activation space, endpoints included.
struct GridSpec {
  int resolution = 200;

  static constexpr double kLow = -1.0;
  static constexpr double kHigh = 1.0;

  void validate() const;
  std::size_t cells() const {
    return static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  }
  double axis(int i) const;
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(resolution) +
           static_cast<std::size_t>(ix);
  }
};

/// Row-major: point (ix, iy) sits at index iy * resolution + ix, x = PB1.
std::vector<Eigen::Vector2d> pb_grid(const GridSpec& spec);

/// Closed-loop action at a fixed PB point: the home posture followed by
/// steps - 1 decoded predictions, so the result has exactly `steps` frames.
JointTrajectory generate_action(const Checkpoint& cp, const VectorX<double>& pb, int steps);

/// Trained PB activation per pattern, in training order.
std::vector<Eigen::Vector2d> learned_pb_points(const Checkpoint& cp);

struct SweepCell {
  int ix = 0;
  int iy = 0;
  Eigen::Vector2d pb = Eigen::Vector2d::Zero();
  PatternLabel label;
};

struct SweepConfig {
  GridSpec grid;
  int steps = 0;                            // 0: longest training pattern
  std::optional<double> learned_threshold;  // default: calibrated from the training set
  int threads = 0;                          // 0: NOVACT_THREADS or 1
};

struct SweepResult {
  GridSpec grid;
  int steps = 0;
  double learned_threshold = 0.0;
  std::vector<SweepCell> cells;  // grid order

  std::size_t count(PatternClass c) const;
  const SweepCell& at(int ix, int iy) const { return cells[grid.index(ix, iy)]; }
};

/// Everything the sweep needs besides the checkpoint, resolved once.
struct Classifier {
  AppropriatenessRule rule;
  double learned_threshold = 0.0;

  static Classifier from_checkpoint(const Checkpoint& cp,
                                    std::optional<double> learned_threshold = std::nullopt);
  PatternLabel operator()(const JointTrajectory& traj, const TrainingSet& training) const;
};

/// Generates and classifies one action per grid cell. When `records` is given,
/// each cell's JSON line is written there in grid order as soon as its block
/// of cells is done.
SweepResult sweep(const Checkpoint& cp, const SweepConfig& cfg, std::ostream* records = nullptr);

nlohmann::ordered_json cell_to_json(const SweepCell& cell);
SweepCell cell_from_json(const nlohmann::json& j);

/// Sweep directory layout: cells.jsonl (one record per cell) plus sweep.json
/// (grid, steps, threshold).
struct SweepFiles {
  static constexpr const char* kRecords = "cells.jsonl";
  static constexpr const char* kMeta = "sweep.json";
  static constexpr const char* kReport = "report.json";
  static constexpr const char* kMap = "map.png";
  static constexpr const char* kLegend = "map.legend.json";
};

/// Runs a sweep streaming records into `dir`, then writes the meta file.
SweepResult sweep_to_directory(const Checkpoint& cp, const SweepConfig& cfg,
                               const std::filesystem::path& dir);

void write_sweep_meta(const SweepResult& result, const std::filesystem::path& dir);

/// Reads a sweep directory (or a bare records file, inferring the grid and
/// taking the threshold from `fallback_threshold`).
SweepResult load_sweep(const std::filesystem::path& path,
                       std::optional<double> fallback_threshold = std::nullopt);

/// Majority-class downsample by an integer factor. Ties go to the class that
/// comes first in kAllClasses; appropriate blocks keep their most frequent
/// nearest label and the mean min DTW of the cells carrying it.
SweepResult downsample(const SweepResult& result, int resolution);

enum class SamplePool { Appropriate, All };

std::string_view to_string(SamplePool p) noexcept;

struct SummaryConfig {
  ResampleConfig resample;
  SamplePool pool = SamplePool::Appropriate;
  int threads = 0;
};

struct RegionSize {
  std::string label;
  std::size_t appropriate = 0;  // appropriate cells whose nearest pattern is this one
  std::size_t learned = 0;      // of those, within the learned threshold
};

struct SweepReport {
  std::size_t total = 0;
  std::map<PatternClass, std::size_t> counts;
  std::map<PatternClass, double> percent;
  double appropriate_percent = 0.0;
  double learned_fraction = 0.0;  // learned / appropriate, 0 if nothing is appropriate
  std::optional<ResampledStat> novelty;
  std::optional<ResampledStat> diversity;
  std::string resample_note;  // why novelty/diversity are missing, if they are
  std::vector<RegionSize> regions;
  SummaryConfig config;
  double learned_threshold = 0.0;
  int steps = 0;
  int resolution = 0;
};

/// Table-style summary of a sweep. Novelty uses the stored min DTW where
/// available; diversity regenerates only the sampled cells.
SweepReport summarize(const SweepResult& result, const Checkpoint& cp, const SummaryConfig& cfg);

nlohmann::ordered_json to_json(const SweepReport& report);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kFluctuatingColor{128, 0, 128};
inline constexpr Rgb kNonMovingColor{255, 192, 203};

/// Base hue for training pattern k.
Rgb pattern_color(std::size_t k);

/// 1 at min DTW 0, falling linearly to 0 at four times the learned threshold.
double similarity(double min_dtw, double learned_threshold);

struct LegendEntry {
  std::string name;  // pattern label or class name
  Rgb color;
};

struct MapImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row is PB2 = +1
  std::vector<LegendEntry> legend;

  Rgb pixel(int x, int y) const;
};

/// Appropriate cells take their nearest pattern's hue blended toward white as
/// similarity drops; fluctuating cells are purple and non-moving cells pink.
MapImage render_map(const SweepResult& result, const std::vector<std::string>& labels);

void write_png(const MapImage& image, const std::filesystem::path& path);
void write_ppm(const MapImage& image, const std::filesystem::path& path);
nlohmann::ordered_json legend_json(const MapImage& image);

}  // namespace novact

#include "novact/metrics.hpp"

#include "novact/parallel.hpp"
#include "novact/rng.hpp"

#include <limits>
#include <map>
#include <numeric>

namespace novact {

namespace {

ResampledStat summarize(const std::vector<double>& per_iteration) {
  ResampledStat s;
  const auto n = static_cast<double>(per_iteration.size());
  s.mean = std::accumulate(per_iteration.begin(), per_iteration.end(), 0.0) / n;
  if (per_iteration.size() > 1) {
    double ss = 0.0;
    for (double v : per_iteration) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

void check_resample(std::size_t pool, const ResampleConfig& cfg, int min_sample) {
  require(cfg.iterations >= 1, ErrorKind::InvalidArgument, "need at least one iteration");
  require(cfg.sample_size >= min_sample, ErrorKind::InsufficientPatterns,
          "sample size must be at least " + std::to_string(min_sample));
  require(pool >= static_cast<std::size_t>(cfg.sample_size), ErrorKind::InsufficientPatterns,
          "only " + std::to_string(pool) + " patterns available, sample size is " +
              std::to_string(cfg.sample_size));
}

}  // namespace

AppropriatenessRule AppropriatenessRule::from_stats(const TrainingStats& stats,
                                                    double velocity_factor,
                                                    double movement_fraction) {
  AppropriatenessRule rule;
  rule.velocity_limit = velocity_factor * stats.max_velocity;
  rule.movement_floor = movement_fraction * stats.range();
  require(rule.velocity_limit > 0.0, ErrorKind::InvalidArgument,
          "velocity limit must be positive (training data never moves)");
  return rule;
}

std::string_view to_string(PatternClass c) noexcept {
  switch (c) {
    case PatternClass::AppropriateUnlearned: return "appropriate-unlearned";
    case PatternClass::AppropriateLearned: return "appropriate-learned";
    case PatternClass::Fluctuating: return "fluctuating";
    case PatternClass::NonMoving: return "non-moving";
  }
  return "unknown";
}

std::optional<PatternClass> parse_pattern_class(std::string_view text) noexcept {
  for (auto c : kAllClasses) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

NearestPattern nearest_training_pattern(const JointTrajectory& traj, const TrainingSet& training) {
  require(!training.patterns.empty(), ErrorKind::InvalidArgument, "training set is empty");
  NearestPattern best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < training.patterns.size(); ++k) {
    const double d = dtw_distance(traj, training.patterns[k]);
    if (d < best.distance) best = {k, d};
  }
  return best;
}

double default_learned_threshold(const TrainingSet& training) {
  require(training.patterns.size() >= 2, ErrorKind::InsufficientPatterns,
          "need two training patterns to calibrate the learned threshold");
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < training.patterns.size(); ++i) {
    for (std::size_t j = i + 1; j < training.patterns.size(); ++j) {
      smallest = std::min(smallest, dtw_distance(training.patterns[i], training.patterns[j]));
    }
  }
  return 0.25 * smallest;
}

PatternLabel classify_pattern(const JointTrajectory& traj, const AppropriatenessRule& rule,
                              const TrainingSet& training, double learned_threshold) {
  require(traj.joints() == rule.movement_floor.size(), ErrorKind::DimensionMismatch,
          "trajectory joint count does not match the rule");
  PatternLabel label;
  if (traj.steps() >= 2) {
    const double peak = (traj.values.bottomRows(traj.steps() - 1) -
                         traj.values.topRows(traj.steps() - 1))
                            .cwiseAbs()
                            .maxCoeff();
    if (peak > rule.velocity_limit) {
      label.cls = PatternClass::Fluctuating;
      return label;
    }
  }
  const VectorX<double> range =
      (traj.values.colwise().maxCoeff() - traj.values.colwise().minCoeff()).transpose();
  if ((range.array() < rule.movement_floor.array()).all()) {
    label.cls = PatternClass::NonMoving;
    return label;
  }
  const auto nearest = nearest_training_pattern(traj, training);
  label.cls = nearest.distance <= learned_threshold ? PatternClass::AppropriateLearned
                                                    : PatternClass::AppropriateUnlearned;
  label.nearest = training.patterns[nearest.index].name;
  label.min_dtw = nearest.distance;
  return label;
}

std::vector<std::vector<std::size_t>> draw_samples(std::size_t pool, const ResampleConfig& cfg) {
  check_resample(pool, cfg, 1);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(pool);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // partial Fisher-Yates: the first sample_size slots are a uniform draw without replacement
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.sample_size); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool - i));
      std::swap(order[i], order[j]);
    }
    out.emplace_back(order.begin(), order.begin() + cfg.sample_size);
  }
  return out;
}

ResampledStat novelty_from_distances(std::span<const double> min_dtw, const ResampleConfig& cfg) {
  const auto samples = draw_samples(min_dtw.size(), cfg);
  std::vector<double> per_iteration;
  per_iteration.reserve(samples.size());
  for (const auto& idx : samples) {
    double sum = 0.0;
    for (auto i : idx) sum += min_dtw[i];
    per_iteration.push_back(sum / static_cast<double>(idx.size()));
  }
  return summarize(per_iteration);
}

ResampledStat novelty(std::span<const JointTrajectory> generated, const TrainingSet& training,
                      const ResampleConfig& cfg) {
  check_resample(generated.size(), cfg, 1);
  std::vector<double> distances(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    distances[i] = nearest_training_pattern(generated[i], training).distance;
  }
  return novelty_from_distances(distances, cfg);
}

ResampledStat diversity(std::span<const JointTrajectory> generated, const ResampleConfig& cfg) {
  return diversity(
      generated.size(), [&](std::size_t i) { return generated[i]; }, cfg);
}

ResampledStat diversity(std::size_t pool, const std::function<JointTrajectory(std::size_t)>& fetch,
                        const ResampleConfig& cfg, int threads) {
  check_resample(pool, cfg, 2);
  const auto samples = draw_samples(pool, cfg);

  std::map<std::size_t, std::size_t> slot;
  for (const auto& idx : samples) {
    for (auto i : idx) slot.emplace(i, 0);
  }
  std::vector<std::size_t> unique;
  unique.reserve(slot.size());
  for (auto& [index, s] : slot) {
    s = unique.size();
    unique.push_back(index);
  }
  std::vector<JointTrajectory> cache(unique.size());
  parallel_for(unique.size(), threads, [&](std::size_t k) { cache[k] = fetch(unique[k]); });

  std::vector<double> per_iteration(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t it) {
    const auto& idx = samples[it];
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        sum += dtw_distance(cache[slot.at(idx[a])], cache[slot.at(idx[b])]);
        ++pairs;
      }
    }
    per_iteration[it] = sum / static_cast<double>(pairs);
  });
  return summarize(per_iteration);
}

}  // namespace novact

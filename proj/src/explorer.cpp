#include "novact/explorer.hpp"

#include "novact/parallel.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace novact {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kSweepFormat = "novact-sweep/1";

std::size_t class_slot(PatternClass c) {
  for (std::size_t i = 0; i < kAllClasses.size(); ++i) {
    if (kAllClasses[i] == c) return i;
  }
  return 0;
}

ojson stat_json(const std::optional<ResampledStat>& s) {
  if (!s) return nullptr;
  return ojson{{"mean", s->mean}, {"stdev", s->stdev}};
}

}  // namespace

void GridSpec::validate() const {
  require(resolution >= 2, ErrorKind::InvalidArgument, "grid resolution must be at least 2");
}

double GridSpec::axis(int i) const {
  if (i == resolution - 1) return kHigh;  // exact endpoint
  return kLow + (kHigh - kLow) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

std::vector<Eigen::Vector2d> pb_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<Eigen::Vector2d> points;
  points.reserve(spec.cells());
  for (int iy = 0; iy < spec.resolution; ++iy) {
    for (int ix = 0; ix < spec.resolution; ++ix) points.emplace_back(spec.axis(ix), spec.axis(iy));
  }
  return points;
}

JointTrajectory generate_action(const Checkpoint& cp, const VectorX<double>& pb, int steps) {
  const auto& spec = cp.params.spec;
  require(steps >= 1, ErrorKind::InvalidArgument, "need at least one frame");
  require(pb.size() == spec.pb_dim, ErrorKind::ShapeMismatch, "PB point width mismatch");
  JointTrajectory out{Sequence<double>(steps, spec.joints), {}};
  out.values.row(0) = cp.stats.home.transpose();
  if (steps > 1) {
    const auto [predictions, state] = generate<double>(
        spec, cp.params.weights, pb, steps - 1, 1.0, encode_frame(cp.stats.home, cp.codec));
    out.values.bottomRows(steps - 1) = decode_trajectory(predictions, cp.codec).values;
  }
  return out;
}

std::vector<Eigen::Vector2d> learned_pb_points(const Checkpoint& cp) {
  require(cp.params.spec.pb_dim == 2, ErrorKind::InvalidArgument, "PB space must be 2-D");
  std::vector<Eigen::Vector2d> out;
  for (Eigen::Index k = 0; k < cp.params.pb.size(); ++k) {
    out.emplace_back(pb_activation(cp.params.pb.rho.col(k)));
  }
  return out;
}

std::size_t SweepResult::count(PatternClass c) const {
  std::size_t n = 0;
  for (const auto& cell : cells) n += cell.label.cls == c ? 1 : 0;
  return n;
}

Classifier Classifier::from_checkpoint(const Checkpoint& cp, std::optional<double> threshold) {
  Classifier c;
  c.rule = AppropriatenessRule::from_stats(cp.stats);
  c.learned_threshold = threshold ? *threshold : default_learned_threshold(cp.training);
  require(c.learned_threshold >= 0.0, ErrorKind::InvalidArgument,
          "learned threshold must be non-negative");
  return c;
}

PatternLabel Classifier::operator()(const JointTrajectory& traj,
                                    const TrainingSet& training) const {
  return classify_pattern(traj, rule, training, learned_threshold);
}

ojson cell_to_json(const SweepCell& cell) {
  ojson j;
  j["ix"] = cell.ix;
  j["iy"] = cell.iy;
  j["pb"] = {cell.pb.x(), cell.pb.y()};
  j["class"] = std::string(to_string(cell.label.cls));
  j["nearest"] = cell.label.nearest ? ojson(*cell.label.nearest) : ojson(nullptr);
  j["min_dtw"] = cell.label.min_dtw ? ojson(*cell.label.min_dtw) : ojson(nullptr);
  return j;
}

SweepCell cell_from_json(const nlohmann::json& j) {
  try {
    SweepCell cell;
    cell.ix = j.at("ix").get<int>();
    cell.iy = j.at("iy").get<int>();
    const auto& pb = j.at("pb");
    require(pb.is_array() && pb.size() == 2, ErrorKind::ParseError, "pb must be [x, y]");
    cell.pb = {pb[0].get<double>(), pb[1].get<double>()};
    const auto cls = parse_pattern_class(j.at("class").get<std::string>());
    require(cls.has_value(), ErrorKind::ParseError, "unknown class in sweep record");
    cell.label.cls = *cls;
    if (!j.at("nearest").is_null()) cell.label.nearest = j["nearest"].get<std::string>();
    if (!j.at("min_dtw").is_null()) cell.label.min_dtw = j["min_dtw"].get<double>();
    require(cell.label.nearest.has_value() == is_appropriate(cell.label.cls) &&
                cell.label.min_dtw.has_value() == is_appropriate(cell.label.cls),
            ErrorKind::ParseError, "nearest/min_dtw must be present exactly for appropriate cells");
    return cell;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("bad sweep record: ") + e.what());
  }
}

SweepResult sweep(const Checkpoint& cp, const SweepConfig& cfg, std::ostream* records) {
  cfg.grid.validate();
  require(cp.params.spec.pb_dim == 2, ErrorKind::InvalidArgument, "sweeps need a 2-D PB space");
  require(cfg.steps >= 0, ErrorKind::InvalidArgument, "steps must be non-negative");
  const Classifier classify = Classifier::from_checkpoint(cp, cfg.learned_threshold);
  const int threads = resolve_threads(cfg.threads);

  SweepResult result;
  result.grid = cfg.grid;
  result.steps = cfg.steps > 0 ? cfg.steps : cp.stats.max_steps;
  result.learned_threshold = classify.learned_threshold;
  result.cells.resize(cfg.grid.cells());

  // one grid row per block keeps the record stream ordered and memory flat
  const int res = cfg.grid.resolution;
  for (int iy = 0; iy < res; ++iy) {
    parallel_for(static_cast<std::size_t>(res), threads, [&](std::size_t k) {
      const int ix = static_cast<int>(k);
      auto& cell = result.cells[cfg.grid.index(ix, iy)];
      cell.ix = ix;
      cell.iy = iy;
      cell.pb = {cfg.grid.axis(ix), cfg.grid.axis(iy)};
      const auto traj = generate_action(cp, cell.pb, result.steps);
      cell.label = classify(traj, cp.training);
    });
    if (records != nullptr) {
      for (int ix = 0; ix < res; ++ix) {
        *records << cell_to_json(result.cells[cfg.grid.index(ix, iy)]).dump() << '\n';
      }
      require(static_cast<bool>(*records), ErrorKind::IOError, "failed writing sweep records");
    }
  }
  return result;
}

SweepResult sweep_to_directory(const Checkpoint& cp, const SweepConfig& cfg,
                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / SweepFiles::kRecords, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write records in " + dir.string());
  auto result = sweep(cp, cfg, &out);
  out.close();
  write_sweep_meta(result, dir);
  return result;
}

void write_sweep_meta(const SweepResult& result, const std::filesystem::path& dir) {
  ojson meta;
  meta["format"] = kSweepFormat;
  meta["resolution"] = result.grid.resolution;
  meta["bounds"] = {GridSpec::kLow, GridSpec::kHigh};
  meta["cells"] = result.cells.size();
  meta["steps"] = result.steps;
  meta["learned_threshold"] = result.learned_threshold;
  meta["dtw"] = {{"local", DtwConfig::kLocalDistance}, {"window", DtwConfig::kWindow}};
  std::ofstream out(dir / SweepFiles::kMeta, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write sweep meta in " + dir.string());
  out << meta.dump(2) << '\n';
}

SweepResult load_sweep(const std::filesystem::path& path, std::optional<double> fallback_threshold) {
  const bool is_dir = std::filesystem::is_directory(path);
  const auto records = is_dir ? path / SweepFiles::kRecords : path;
  const auto meta_path = (is_dir ? path : path.parent_path()) / SweepFiles::kMeta;

  std::ifstream in(records);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open " + records.string());
  std::vector<SweepCell> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError,
                  records.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    cells.push_back(cell_from_json(j));
  }

  SweepResult result;
  std::optional<nlohmann::json> meta;
  if (std::filesystem::exists(meta_path)) {
    std::ifstream min(meta_path);
    try {
      meta = nlohmann::json::parse(min);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, meta_path.string() + ": " + e.what());
    }
    require(meta->value("format", std::string{}) == kSweepFormat, ErrorKind::VersionMismatch,
            meta_path.string() + ": unsupported sweep format");
    result.grid.resolution = meta->at("resolution").get<int>();
    result.steps = meta->at("steps").get<int>();
    result.learned_threshold = meta->at("learned_threshold").get<double>();
  } else {
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cells.size()))));
    result.grid.resolution = side;
    require(fallback_threshold.has_value(), ErrorKind::InvalidArgument,
            "no " + std::string(SweepFiles::kMeta) + " next to " + records.string() +
                "; a learned threshold must be supplied");
    result.learned_threshold = *fallback_threshold;
  }
  if (fallback_threshold && meta) result.learned_threshold = *fallback_threshold;

  result.grid.validate();
  require(cells.size() == result.grid.cells(), ErrorKind::ParseError,
          records.string() + ": expected " + std::to_string(result.grid.cells()) +
              " records, found " + std::to_string(cells.size()));
  result.cells.resize(cells.size());
  std::vector<bool> seen(cells.size(), false);
  for (auto& c : cells) {
    require(c.ix >= 0 && c.iy >= 0 && c.ix < result.grid.resolution &&
                c.iy < result.grid.resolution,
            ErrorKind::ParseError, "sweep record outside the grid");
    const auto idx = result.grid.index(c.ix, c.iy);
    require(!seen[idx], ErrorKind::ParseError, "duplicate sweep record");
    seen[idx] = true;
    result.cells[idx] = std::move(c);
  }
  return result;
}

SweepResult downsample(const SweepResult& result, int resolution) {
  GridSpec target{resolution};
  target.validate();
  const int src = result.grid.resolution;
  require(resolution <= src && src % resolution == 0, ErrorKind::InvalidArgument,
          "map resolution must divide the sweep resolution " + std::to_string(src));
  if (resolution == src) return result;
  const int f = src / resolution;

  SweepResult out;
  out.grid = target;
  out.steps = result.steps;
  out.learned_threshold = result.learned_threshold;
  out.cells.resize(target.cells());
  for (int by = 0; by < resolution; ++by) {
    for (int bx = 0; bx < resolution; ++bx) {
      std::array<int, 4> votes{};
      Eigen::Vector2d pb = Eigen::Vector2d::Zero();
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          const auto& c = result.at(bx * f + dx, by * f + dy);
          ++votes[class_slot(c.label.cls)];
          pb += c.pb;
        }
      }
      std::size_t winner = 0;
      for (std::size_t s = 1; s < votes.size(); ++s) {
        if (votes[s] > votes[winner]) winner = s;
      }
      auto& cell = out.cells[target.index(bx, by)];
      cell.ix = bx;
      cell.iy = by;
      cell.pb = pb / static_cast<double>(f * f);
      cell.label.cls = kAllClasses[winner];
      if (!is_appropriate(cell.label.cls)) continue;

      // most frequent nearest label among the winning cells, first seen wins ties
      std::vector<std::pair<std::string, std::pair<int, double>>> tally;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          const auto& c = result.at(bx * f + dx, by * f + dy);
          if (c.label.cls != cell.label.cls) continue;
          auto it = std::find_if(tally.begin(), tally.end(),
                                 [&](const auto& t) { return t.first == *c.label.nearest; });
          if (it == tally.end()) {
            tally.push_back({*c.label.nearest, {1, *c.label.min_dtw}});
          } else {
            ++it->second.first;
            it->second.second += *c.label.min_dtw;
          }
        }
      }
      const auto best = std::max_element(tally.begin(), tally.end(), [](const auto& a, const auto& b) {
        return a.second.first < b.second.first;
      });
      cell.label.nearest = best->first;
      cell.label.min_dtw = best->second.second / static_cast<double>(best->second.first);
    }
  }
  return out;
}

std::string_view to_string(SamplePool p) noexcept {
  return p == SamplePool::Appropriate ? "appropriate" : "all";
}

SweepReport summarize(const SweepResult& result, const Checkpoint& cp, const SummaryConfig& cfg) {
  SweepReport report;
  report.total = result.cells.size();
  report.config = cfg;
  report.learned_threshold = result.learned_threshold;
  report.steps = result.steps;
  report.resolution = result.grid.resolution;
  require(report.total > 0, ErrorKind::InvalidArgument, "empty sweep");

  for (auto c : kAllClasses) {
    report.counts[c] = result.count(c);
    report.percent[c] =
        100.0 * static_cast<double>(report.counts[c]) / static_cast<double>(report.total);
  }
  const std::size_t learned = report.counts[PatternClass::AppropriateLearned];
  const std::size_t appropriate = learned + report.counts[PatternClass::AppropriateUnlearned];
  report.appropriate_percent =
      100.0 * static_cast<double>(appropriate) / static_cast<double>(report.total);
  report.learned_fraction =
      appropriate > 0 ? static_cast<double>(learned) / static_cast<double>(appropriate) : 0.0;

  for (const auto& label : cp.training.labels()) report.regions.push_back({label, 0, 0});
  for (const auto& cell : result.cells) {
    if (!is_appropriate(cell.label.cls)) continue;
    auto it = std::find_if(report.regions.begin(), report.regions.end(),
                           [&](const RegionSize& r) { return r.label == *cell.label.nearest; });
    require(it != report.regions.end(), ErrorKind::InvalidArgument,
            "sweep refers to pattern '" + *cell.label.nearest + "' missing from the checkpoint");
    ++it->appropriate;
    if (cell.label.cls == PatternClass::AppropriateLearned) ++it->learned;
  }

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    if (cfg.pool == SamplePool::All || is_appropriate(result.cells[i].label.cls)) pool.push_back(i);
  }
  const auto regenerate = [&](std::size_t k) {
    return generate_action(cp, result.cells[pool[k]].pb, result.steps);
  };
  const int threads = resolve_threads(cfg.threads);

  try {
    const auto samples = draw_samples(pool.size(), cfg.resample);
    std::vector<double> distances(pool.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> missing;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (const auto& d = result.cells[pool[k]].label.min_dtw) distances[k] = *d;
    }
    for (const auto& idx : samples) {
      for (auto k : idx) {
        if (std::isnan(distances[k])) missing.push_back(k);
      }
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    parallel_for(missing.size(), threads, [&](std::size_t m) {
      distances[missing[m]] = nearest_training_pattern(regenerate(missing[m]), cp.training).distance;
    });
    report.novelty = novelty_from_distances(distances, cfg.resample);
    report.diversity = diversity(pool.size(), regenerate, cfg.resample, threads);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientPatterns) throw;
    report.resample_note = e.what();
  }
  return report;
}

ojson to_json(const SweepReport& r) {
  ojson j;
  j["cells"] = r.total;
  j["resolution"] = r.resolution;
  j["steps"] = r.steps;
  ojson classes;
  for (auto c : kAllClasses) {
    classes[std::string(to_string(c))] = {{"count", r.counts.at(c)}, {"percent", r.percent.at(c)}};
  }
  j["classes"] = std::move(classes);
  j["appropriate_percent"] = r.appropriate_percent;
  j["learned_fraction_of_appropriate"] = r.learned_fraction;
  j["novelty"] = stat_json(r.novelty);
  j["diversity"] = stat_json(r.diversity);
  if (!r.resample_note.empty()) j["resample_note"] = r.resample_note;
  ojson regions = ojson::array();
  for (const auto& reg : r.regions) {
    regions.push_back({{"label", reg.label},
                       {"appropriate", reg.appropriate},
                       {"learned", reg.learned}});
  }
  j["regions"] = std::move(regions);
  j["config"] = {{"iterations", r.config.resample.iterations},
                 {"sample_size", r.config.resample.sample_size},
                 {"seed", r.config.resample.seed},
                 {"pool", std::string(to_string(r.config.pool))},
                 {"learned_threshold", r.learned_threshold},
                 {"dtw", {{"local", DtwConfig::kLocalDistance}, {"window", DtwConfig::kWindow}}}};
  return j;
}

}  // namespace novact

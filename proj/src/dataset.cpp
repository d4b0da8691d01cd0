#include "novact/dataset.hpp"

#include "novact/rng.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace novact {

namespace {

enum ArmJoint { kPitch = 0, kRoll = 1, kYaw = 2, kElbow = 3 };

// A raised-cosine excursion of one joint inside a normalized time window.
struct Bump {
  ArmJoint joint;
  double amplitude;  // right-arm sign convention, radians
  double begin;
  double end;
};

struct ActionTemplate {
  std::string label;
  bool left;
  std::vector<Bump> striking;
  std::vector<Bump> guard;  // the other arm
};

const std::vector<ActionTemplate>& action_templates() {
  static const std::vector<Bump> jab{{kPitch, -0.85, 0.10, 0.90},
                                     {kRoll, 0.15, 0.15, 0.85},
                                     {kYaw, 0.25, 0.10, 0.90},
                                     {kElbow, -1.10, 0.15, 0.85}};
  static const std::vector<Bump> straight{{kPitch, -1.00, 0.05, 0.95},
                                          {kRoll, 0.30, 0.10, 0.90},
                                          {kYaw, 0.50, 0.05, 0.95},
                                          {kElbow, -1.20, 0.10, 0.90}};
  static const std::vector<Bump> hook{{kPitch, -0.55, 0.10, 0.90},
                                      {kRoll, 0.90, 0.20, 0.95},
                                      {kYaw, -0.60, 0.10, 0.80},
                                      {kElbow, -0.35, 0.15, 0.85}};
  static const std::vector<Bump> uppercut{{kPitch, 0.35, 0.05, 0.40},
                                          {kPitch, -0.90, 0.30, 0.95},
                                          {kRoll, 0.25, 0.20, 0.90},
                                          {kYaw, 0.90, 0.10, 0.90},
                                          {kElbow, -0.25, 0.20, 0.80}};
  static const std::vector<Bump> guard_a{{kPitch, 0.12, 0.10, 0.90}, {kElbow, 0.10, 0.10, 0.90}};
  static const std::vector<Bump> guard_b{{kPitch, 0.15, 0.05, 0.95}, {kRoll, -0.10, 0.10, 0.90}};
  static const std::vector<Bump> guard_c{{kRoll, -0.12, 0.15, 0.90}, {kElbow, 0.10, 0.15, 0.85}};
  static const std::vector<Bump> guard_d{{kPitch, 0.10, 0.10, 0.90}, {kYaw, -0.10, 0.10, 0.90}};

  static const std::vector<ActionTemplate> actions{
      {"L.Jab", true, jab, guard_a},       {"R.Straight", false, straight, guard_b},
      {"L.Hook", true, hook, guard_c},     {"R.Hook", false, hook, guard_c},
      {"L.Upper", true, uppercut, guard_d}, {"R.Upper", false, uppercut, guard_d},
  };
  return actions;
}

double raised_cosine(double phase, double begin, double end) {
  if (phase <= begin || phase >= end) return 0.0;
  const double s = (phase - begin) / (end - begin);
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * s));
}

// Left-arm joints mirror the right arm: pitch keeps its sign, roll/yaw/elbow flip.
constexpr std::array<double, 4> kLeftMirror{1.0, -1.0, -1.0, -1.0};

void apply_bumps(Sequence<double>& values, const std::vector<Bump>& bumps, bool left_arm,
                 double scale) {
  const Eigen::Index steps = values.rows();
  const int offset = left_arm ? 4 : 0;
  for (const auto& bump : bumps) {
    const double sign = left_arm ? kLeftMirror[bump.joint] : 1.0;
    for (Eigen::Index t = 0; t < steps; ++t) {
      const double phase = static_cast<double>(t) / static_cast<double>(steps - 1);
      values(t, offset + bump.joint) +=
          sign * scale * bump.amplitude * raised_cosine(phase, bump.begin, bump.end);
    }
  }
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string>& arm_joint_names() {
  static const std::vector<std::string> names{
      "RShoulderPitch", "RShoulderRoll", "RElbowYaw", "RElbowRoll",
      "LShoulderPitch", "LShoulderRoll", "LElbowYaw", "LElbowRoll"};
  return names;
}

const std::vector<std::string>& boxing_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (const auto& a : action_templates()) out.push_back(a.label);
    return out;
  }();
  return labels;
}

VectorX<double> guard_posture() {
  VectorX<double> home(8);
  home << 0.90, -0.25, 1.00, 1.30, 0.90, 0.25, -1.00, -1.30;
  return home;
}

std::vector<std::string> TrainingSet::labels() const {
  std::vector<std::string> out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) out.push_back(p.name);
  return out;
}

void TrainingSet::validate() const {
  require(!patterns.empty(), ErrorKind::InvalidArgument, "training set has no patterns");
  require(!joint_names.empty(), ErrorKind::InvalidArgument, "training set has no joints");
  std::set<std::string> seen;
  for (const auto& p : patterns) {
    require(seen.insert(p.name).second, ErrorKind::InvalidArgument,
            "duplicate pattern label '" + p.name + "'");
    require(p.joints() == joints(), ErrorKind::InconsistentDims,
            "pattern '" + p.name + "' has " + std::to_string(p.joints()) + " joints, expected " +
                std::to_string(joints()));
    require(p.steps() >= 2, ErrorKind::InvalidArgument,
            "pattern '" + p.name + "' needs at least 2 steps");
    require(p.values.allFinite(), ErrorKind::NonFinite,
            "pattern '" + p.name + "' contains non-finite values");
  }
}

void SynthConfig::validate() const {
  require(steps >= 10, ErrorKind::InvalidArgument, "synthetic actions need at least 10 steps");
  require(noise >= 0.0, ErrorKind::InvalidArgument, "noise amplitude must be non-negative");
  require(amplitudes.size() == action_templates().size(), ErrorKind::InvalidArgument,
          "need one amplitude scale per action (" + std::to_string(action_templates().size()) +
              ")");
}

TrainingSet synthesize_boxing_set(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const VectorX<double> home = guard_posture();

  TrainingSet set;
  set.joint_names = arm_joint_names();
  set.sample_period_s = 0.05;
  const auto& actions = action_templates();
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const auto& action = actions[a];
    Sequence<double> values = home.transpose().replicate(cfg.steps, 1);
    apply_bumps(values, action.striking, action.left, cfg.amplitudes[a]);
    apply_bumps(values, action.guard, !action.left, cfg.amplitudes[a]);
    if (cfg.noise > 0.0) {
      for (Eigen::Index t = 0; t < values.rows(); ++t) {
        const double taper =
            std::sin(std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.steps - 1));
        for (Eigen::Index d = 0; d < values.cols(); ++d) {
          values(t, d) += cfg.noise * taper * rng.normal();
        }
      }
      values.row(0) = home.transpose();
      values.row(values.rows() - 1) = home.transpose();
    }
    set.patterns.push_back({std::move(values), action.label});
  }
  return set;
}

JointTrajectory read_trajectory_csv(const std::filesystem::path& file, std::string label) {
  std::ifstream in(file);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open " + file.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::ParseError,
          file.string() + ": missing header row");
  const auto header = split_csv_line(line);
  const auto width = static_cast<Eigen::Index>(header.size());
  require(width > 0, ErrorKind::ParseError, file.string() + ": empty header");

  std::vector<double> flat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    require(static_cast<Eigen::Index>(cells.size()) == width, ErrorKind::ParseError,
            file.string() + ":" + std::to_string(row) + ": expected " + std::to_string(width) +
                " cells, got " + std::to_string(cells.size()));
    for (const auto& raw : cells) {
      const std::string cell = trim(raw);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      require(ec == std::errc() && ptr == cell.data() + cell.size() && !cell.empty(),
              ErrorKind::ParseError,
              file.string() + ":" + std::to_string(row) + ": not a number: '" + cell + "'");
      require(std::isfinite(value), ErrorKind::NonFinite,
              file.string() + ":" + std::to_string(row) + ": non-finite value");
      flat.push_back(value);
    }
  }
  const auto steps = static_cast<Eigen::Index>(flat.size()) / width;
  require(steps >= 2, ErrorKind::ParseError, file.string() + ": need at least 2 data rows");
  JointTrajectory traj{Eigen::Map<const Sequence<double>>(flat.data(), steps, width),
                       label.empty() ? file.stem().string() : std::move(label)};
  return traj;
}

void write_trajectory_csv(const JointTrajectory& traj, const std::vector<std::string>& joint_names,
                          const std::filesystem::path& file) {
  require(static_cast<Eigen::Index>(joint_names.size()) == traj.joints(),
          ErrorKind::DimensionMismatch, "joint name count does not match trajectory width");
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + file.string());
  for (std::size_t d = 0; d < joint_names.size(); ++d) {
    out << (d ? "," : "") << joint_names[d];
  }
  out << '\n';
  for (Eigen::Index t = 0; t < traj.steps(); ++t) {
    for (Eigen::Index d = 0; d < traj.joints(); ++d) {
      out << (d ? "," : "") << format_double(traj.values(t, d));
    }
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + file.string());
}

TrainingSet load_training_set(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, manifest.string() + ": " + e.what());
  }
  require(doc.is_object() && doc.contains("patterns") && doc["patterns"].is_array(),
          ErrorKind::ParseError, manifest.string() + ": missing 'patterns' array");
  require(!doc["patterns"].empty(), ErrorKind::ParseError,
          manifest.string() + ": manifest lists no patterns");

  const auto base = manifest.parent_path();
  TrainingSet set;
  if (doc.contains("sample_period_s")) {
    require(doc["sample_period_s"].is_number(), ErrorKind::ParseError,
            "'sample_period_s' must be a number");
    set.sample_period_s = doc["sample_period_s"].get<double>();
  }
  for (const auto& entry : doc["patterns"]) {
    require(entry.is_object() && entry.contains("label") && entry["label"].is_string() &&
                entry.contains("file") && entry["file"].is_string(),
            ErrorKind::ParseError, manifest.string() + ": pattern entries need 'label' and 'file'");
    const auto file = base / entry["file"].get<std::string>();
    auto traj = read_trajectory_csv(file, entry["label"].get<std::string>());

    std::ifstream header_in(file);
    std::string header;
    std::getline(header_in, header);
    auto names = split_csv_line(header);
    for (auto& n : names) n = trim(n);
    if (set.joint_names.empty()) {
      set.joint_names = std::move(names);
    } else {
      require(static_cast<Eigen::Index>(names.size()) == set.joints(), ErrorKind::InconsistentDims,
              file.string() + " has " + std::to_string(names.size()) + " columns, expected " +
                  std::to_string(set.joints()));
    }
    set.patterns.push_back(std::move(traj));
  }
  set.validate();
  return set;
}

void save_training_set(const TrainingSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["patterns"] = nlohmann::ordered_json::array();
  for (const auto& p : set.patterns) {
    const std::string file = p.name + ".csv";
    write_trajectory_csv(p, set.joint_names, dir / file);
    manifest["patterns"].push_back({{"label", p.name}, {"file", file}});
  }
  manifest["sample_period_s"] = set.sample_period_s;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

TrainingStats training_stats(const TrainingSet& set) {
  require(!set.patterns.empty(), ErrorKind::InvalidArgument, "training set has no patterns");
  const Eigen::Index dims = set.patterns.front().joints();
  TrainingStats stats;
  stats.min = VectorX<double>::Constant(dims, std::numeric_limits<double>::infinity());
  stats.max = -stats.min;
  stats.home = VectorX<double>::Zero(dims);
  for (const auto& p : set.patterns) {
    stats.min = stats.min.cwiseMin(p.values.colwise().minCoeff().transpose());
    stats.max = stats.max.cwiseMax(p.values.colwise().maxCoeff().transpose());
    stats.home += p.values.row(0).transpose();
    stats.max_steps = std::max(stats.max_steps, static_cast<int>(p.steps()));
    if (p.steps() > 1) {
      const double v = (p.values.bottomRows(p.steps() - 1) - p.values.topRows(p.steps() - 1))
                           .cwiseAbs()
                           .maxCoeff();
      stats.max_velocity = std::max(stats.max_velocity, v);
    }
  }
  stats.home /= static_cast<double>(set.patterns.size());
  return stats;
}

}  // namespace novact

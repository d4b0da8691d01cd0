#include "novact/trainer.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace novact {

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::Ref<const MatrixX<double>>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorX<double>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

MatrixX<double> matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == rows,
          ErrorKind::CorruptCheckpoint, what + ": wrong row count");
  MatrixX<double> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols,
            ErrorKind::CorruptCheckpoint, what + ": wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      require(cell.is_number(), ErrorKind::CorruptCheckpoint, what + ": non-numeric entry");
      m(r, c) = cell.get<double>();
    }
  }
  return m;
}

VectorX<double> vector_from_json(const json& j, Eigen::Index size, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == size,
          ErrorKind::CorruptCheckpoint, what + ": wrong length");
  VectorX<double> v(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    require(j[static_cast<std::size_t>(i)].is_number(), ErrorKind::CorruptCheckpoint,
            what + ": non-numeric entry");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key) {
  require(j.is_object() && j.contains(key), ErrorKind::CorruptCheckpoint,
          std::string("missing field '") + key + "'");
  return j.at(key);
}

json spec_to_json(const NetworkSpec& s) {
  return json{{"fast", s.fast},       {"middle", s.middle},         {"slow", s.slow},
              {"joints", s.joints},   {"units", s.units},           {"pb_dim", s.pb_dim},
              {"tau_fast", s.tau_fast}, {"tau_middle", s.tau_middle}, {"tau_slow", s.tau_slow}};
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  json doc;
  doc["format"] = Checkpoint::kFormat;
  doc["epoch"] = cp.epoch;
  doc["loss"] = cp.loss;
  doc["spec"] = spec_to_json(cp.params.spec);
  doc["codec"] = {{"sigma", cp.codec.sigma}, {"references", matrix_to_json(cp.codec.references)}};
  doc["stats"] = {{"min", vector_to_json(cp.stats.min)},
                  {"max", vector_to_json(cp.stats.max)},
                  {"home", vector_to_json(cp.stats.home)},
                  {"max_velocity", cp.stats.max_velocity},
                  {"max_steps", cp.stats.max_steps}};
  doc["config"] = {{"gamma", cp.config.gamma},
                   {"epochs", cp.config.epochs},
                   {"learning_rate", cp.config.adam.learning_rate},
                   {"beta1", cp.config.adam.beta1},
                   {"beta2", cp.config.adam.beta2},
                   {"epsilon", cp.config.adam.epsilon},
                   {"seed", cp.config.seed},
                   {"checkpoint_interval", cp.config.checkpoint_interval},
                   {"init_scale", cp.config.init_scale}};
  json patterns = json::array();
  for (const auto& p : cp.training.patterns) {
    patterns.push_back({{"label", p.name}, {"values", matrix_to_json(p.values)}});
  }
  doc["training"] = {{"joint_names", cp.training.joint_names},
                     {"sample_period_s", cp.training.sample_period_s},
                     {"patterns", std::move(patterns)}};
  json weights;
  const auto tensors = cp.params.weights.tensors();
  for (std::size_t i = 0; i < Weights<double>::kCount; ++i) {
    weights[std::string(Weights<double>::kNames[i])] = matrix_to_json(*tensors[i]);
  }
  doc["weights"] = std::move(weights);
  json pb = json::array();
  for (Eigen::Index k = 0; k < cp.params.pb.size(); ++k) {
    pb.push_back({{"label", cp.params.pb.labels[static_cast<std::size_t>(k)]},
                  {"rho", vector_to_json(cp.params.pb.rho.col(k))}});
  }
  doc["pb"] = std::move(pb);

  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + path.string());
  out << doc.dump() << '\n';
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IOError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
  }
  require(doc.is_object() && doc.contains("format") && doc["format"].is_string(),
          ErrorKind::CorruptCheckpoint, path.string() + ": missing format tag");
  const auto format = doc["format"].get<std::string>();
  require(format == Checkpoint::kFormat, ErrorKind::VersionMismatch,
          path.string() + ": unsupported format '" + format + "'");

  Checkpoint cp;
  try {
    cp.epoch = field(doc, "epoch").get<int>();
    cp.loss = field(doc, "loss").get<double>();

    const auto& s = field(doc, "spec");
    auto& spec = cp.params.spec;
    spec.fast = field(s, "fast").get<int>();
    spec.middle = field(s, "middle").get<int>();
    spec.slow = field(s, "slow").get<int>();
    spec.joints = field(s, "joints").get<int>();
    spec.units = field(s, "units").get<int>();
    spec.pb_dim = field(s, "pb_dim").get<int>();
    spec.tau_fast = field(s, "tau_fast").get<double>();
    spec.tau_middle = field(s, "tau_middle").get<double>();
    spec.tau_slow = field(s, "tau_slow").get<double>();
    spec.validate();

    const auto& codec = field(doc, "codec");
    cp.codec.sigma = field(codec, "sigma").get<double>();
    cp.codec.references =
        matrix_from_json(field(codec, "references"), spec.joints, spec.units, "codec.references");
    cp.codec.validate();

    const auto& stats = field(doc, "stats");
    cp.stats.min = vector_from_json(field(stats, "min"), spec.joints, "stats.min");
    cp.stats.max = vector_from_json(field(stats, "max"), spec.joints, "stats.max");
    cp.stats.home = vector_from_json(field(stats, "home"), spec.joints, "stats.home");
    cp.stats.max_velocity = field(stats, "max_velocity").get<double>();
    cp.stats.max_steps = field(stats, "max_steps").get<int>();

    const auto& cfg = field(doc, "config");
    cp.config.gamma = field(cfg, "gamma").get<double>();
    cp.config.epochs = field(cfg, "epochs").get<int>();
    cp.config.adam.learning_rate = field(cfg, "learning_rate").get<double>();
    cp.config.adam.beta1 = field(cfg, "beta1").get<double>();
    cp.config.adam.beta2 = field(cfg, "beta2").get<double>();
    cp.config.adam.epsilon = field(cfg, "epsilon").get<double>();
    cp.config.seed = field(cfg, "seed").get<std::uint64_t>();
    cp.config.checkpoint_interval = field(cfg, "checkpoint_interval").get<int>();
    cp.config.init_scale = field(cfg, "init_scale").get<double>();

    const auto& training = field(doc, "training");
    cp.training.joint_names = field(training, "joint_names").get<std::vector<std::string>>();
    cp.training.sample_period_s = field(training, "sample_period_s").get<double>();
    for (const auto& p : field(training, "patterns")) {
      const auto& values = field(p, "values");
      require(values.is_array() && !values.empty(), ErrorKind::CorruptCheckpoint,
              "training pattern without values");
      const auto label = field(p, "label").get<std::string>();
      const auto rows = static_cast<Eigen::Index>(values.size());
      cp.training.patterns.push_back(
          {matrix_from_json(values, rows, spec.joints, "training." + label), label});
    }
    cp.training.validate();

    const auto& weights = field(doc, "weights");
    auto tensors = cp.params.weights.tensors();
    const auto reference = Weights<double>::zeros(spec);
    const auto shapes = reference.tensors();
    for (std::size_t i = 0; i < Weights<double>::kCount; ++i) {
      const std::string name(Weights<double>::kNames[i]);
      *tensors[i] = matrix_from_json(field(weights, name.c_str()), shapes[i]->rows(),
                                     shapes[i]->cols(), "weights." + name);
    }

    const auto& pb = field(doc, "pb");
    require(pb.is_array(), ErrorKind::CorruptCheckpoint, "pb must be an array");
    cp.params.pb.rho.resize(spec.pb_dim, static_cast<Eigen::Index>(pb.size()));
    for (std::size_t k = 0; k < pb.size(); ++k) {
      cp.params.pb.labels.push_back(field(pb[k], "label").get<std::string>());
      cp.params.pb.rho.col(static_cast<Eigen::Index>(k)) =
          vector_from_json(field(pb[k], "rho"), spec.pb_dim, "pb.rho");
    }
    cp.params.validate();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptCheckpoint) throw;
    throw Error(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
  }
  return cp;
}

}  // namespace novact

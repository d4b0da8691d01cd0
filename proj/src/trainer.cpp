#include "novact/trainer.hpp"

#include "novact/parallel.hpp"
#include "novact/rng.hpp"

#include <chrono>
#include <fstream>
#include <limits>

namespace novact {

void TrainingConfig::validate() const {
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::InvalidArgument,
          "closed-loop ratio gamma must lie in [0, 1]");
  require(epochs >= 1, ErrorKind::InvalidArgument, "epochs must be at least 1");
  require(adam.learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
          ErrorKind::InvalidArgument, "Adam betas must lie in [0, 1)");
  require(adam.epsilon > 0.0, ErrorKind::InvalidArgument, "Adam epsilon must be positive");
  require(checkpoint_interval >= 0, ErrorKind::InvalidArgument,
          "checkpoint interval must be non-negative");
  require(init_scale >= 0.0, ErrorKind::InvalidArgument, "init scale must be non-negative");
}

double mean_group_kl(double total_loss, const TrainingSet& set) {
  double terms = 0.0;
  for (const auto& p : set.patterns) {
    terms += static_cast<double>(p.steps() - 1) * static_cast<double>(p.joints());
  }
  return terms > 0.0 ? total_loss / terms : 0.0;
}

Weights<double> init_weights(const NetworkSpec& spec, double init_scale, std::uint64_t seed) {
  Rng rng(seed);
  auto w = Weights<double>::zeros(spec);
  const auto fan_in = Weights<double>::fan_in(spec);
  auto tensors = w.tensors();
  for (std::size_t i = 0; i < Weights<double>::kCount; ++i) {
    if (Weights<double>::kNames[i].ends_with("_bias")) continue;
    const double bound = init_scale / std::sqrt(static_cast<double>(fan_in[i]));
    auto& t = *tensors[i];
    // column-major fill keeps the stream order fixed for a given spec
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = rng.uniform(-bound, bound);
    }
  }
  return w;
}

TrainResult train(const TrainingSet& set, const NetworkSpec& spec, const TrainingConfig& config,
                  const std::function<void(const Checkpoint&, const LearningCurve&)>&
                      on_checkpoint) {
  set.validate();
  require(spec.joints == set.joints(), ErrorKind::InvalidArgument,
          "network joint count does not match the training set");
  return train_with_codec(set, spec, config, build_reference_points(set.patterns, spec.units),
                          on_checkpoint);
}

TrainResult train_with_codec(const TrainingSet& set, const NetworkSpec& spec,
                             const TrainingConfig& config, const CodecSpec& codec,
                             const std::function<void(const Checkpoint&, const LearningCurve&)>&
                                 on_checkpoint) {
  set.validate();
  spec.validate();
  config.validate();
  codec.validate();
  require(spec.joints == set.joints() && codec.joints() == set.joints(),
          ErrorKind::InvalidArgument, "network/codec joint count does not match the training set");
  require(codec.units() == spec.units, ErrorKind::InvalidArgument,
          "codec and network disagree on softmax units per joint");

  std::vector<Sequence<double>> encoded;
  encoded.reserve(set.patterns.size());
  for (const auto& p : set.patterns) encoded.push_back(encode_trajectory(p, codec));

  const auto patterns = static_cast<Eigen::Index>(set.patterns.size());
  Weights<double> weights = init_weights(spec, config.init_scale, config.seed);
  MatrixX<double> rho = MatrixX<double>::Zero(spec.pb_dim, patterns);
  auto adam = AdamState<double>::fresh(spec, patterns);

  TrainResult result;
  auto& best = result.best;
  best.codec = codec;
  best.stats = training_stats(set);
  best.config = config;
  best.training = set;
  best.params.spec = spec;
  best.params.pb.labels = set.labels();
  best.loss = std::numeric_limits<double>::infinity();

  const int threads = resolve_threads(config.threads);
  std::vector<PatternGradients<double>> per_pattern(set.patterns.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    parallel_for(per_pattern.size(), threads, [&](std::size_t k) {
      per_pattern[k] = bptt_gradients<double>(spec, weights, rho.col(static_cast<Eigen::Index>(k)),
                                              encoded[k], config.gamma);
    });

    // fixed reduction order keeps the sum bit-identical for any thread count
    double loss = 0.0;
    Weights<double> grads = Weights<double>::zeros(spec);
    MatrixX<double> rho_grad(spec.pb_dim, patterns);
    auto acc = grads.tensors();
    for (std::size_t k = 0; k < per_pattern.size(); ++k) {
      loss += per_pattern[k].loss;
      const auto g = per_pattern[k].weights.tensors();
      for (std::size_t i = 0; i < Weights<double>::kCount; ++i) *acc[i] += *g[i];
      rho_grad.col(static_cast<Eigen::Index>(k)) = per_pattern[k].rho;
    }
    require(std::isfinite(loss), ErrorKind::Diverged,
            "loss became non-finite at epoch " + std::to_string(epoch));

    if (loss < best.loss) {
      best.loss = loss;
      best.epoch = epoch;
      best.params.weights = weights;
      best.params.pb.rho = rho;
    }

    adam_update(weights, rho, grads, rho_grad, adam, config.adam);

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    result.curve.loss.push_back(loss);
    result.curve.seconds.push_back(elapsed.count());

    if (on_checkpoint && config.checkpoint_interval > 0 &&
        epoch % config.checkpoint_interval == 0) {
      on_checkpoint(best, result.curve);
    }
  }
  return result;
}

void write_learning_curve(const LearningCurve& curve, const std::filesystem::path& path,
                          bool with_seconds) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IOError, "cannot write " + path.string());
  out << (with_seconds ? "epoch,loss,seconds\n" : "epoch,loss\n");
  out.precision(17);
  for (std::size_t e = 0; e < curve.loss.size(); ++e) {
    out << (e + 1) << ',' << curve.loss[e];
    if (with_seconds) out << ',' << curve.seconds[e];
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::IOError, "write failed: " + path.string());
}

}  // namespace novact

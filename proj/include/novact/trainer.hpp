#pragma once

#include "novact/codec.hpp"
#include "novact/dataset.hpp"
#include "novact/network.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace novact {

inline constexpr double kProbabilityFloor = 1e-12;

/// KL divergence sum_t sum_i target * log(target / prediction) over every
/// output neuron and step. Zero-probability targets contribute nothing;
/// predictions are floored at 1e-12.
template <typename DerivedP, typename DerivedT>
typename DerivedP::Scalar kl_loss(const Eigen::MatrixBase<DerivedP>& prediction,
                                  const Eigen::MatrixBase<DerivedT>& target) {
  using Scalar = typename DerivedP::Scalar;
  require(prediction.rows() == target.rows() && prediction.cols() == target.cols(),
          ErrorKind::ShapeMismatch, "prediction and target shapes differ");
  Scalar total(0);
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const Scalar q = target(r, c);
      if (q <= Scalar(0)) continue;
      const Scalar p = std::max(Scalar(prediction(r, c)), Scalar(kProbabilityFloor));
      total += q * (std::log(q) - std::log(p));
    }
  }
  return total;
}

template <typename Scalar>
struct PatternGradients {
  Weights<Scalar> weights;
  VectorX<Scalar> rho;
  Scalar loss = Scalar(0);
};

namespace detail {

// Jacobian-transpose product of a per-group softmax: o * (g - sum_group(o * g)).
template <typename Scalar>
VectorX<Scalar> group_softmax_backward(const VectorX<Scalar>& out, const VectorX<Scalar>& grad,
                                       Eigen::Index units) {
  VectorX<Scalar> res(out.size());
  for (Eigen::Index start = 0; start < out.size(); start += units) {
    const auto o = out.segment(start, units);
    const auto g = grad.segment(start, units);
    const Scalar inner = o.dot(g);
    res.segment(start, units) = (o.array() * (g.array() - inner)).matrix();
  }
  return res;
}

}  // namespace detail

/// Loss of one pattern and its exact gradient with respect to every weight,
/// bias and the pattern's PB internal state.
///
/// The pattern is an encoded T x (D*J) sequence. Step s (0-based) consumes
/// input frame s and is scored against frame s + 1, so T - 1 steps are
/// unrolled. Input 0 is teacher frame 0; later inputs mix the previous
/// prediction and the teacher frame with ratio `gamma`, and the gradient flows
/// back through that mixing path.
template <typename Scalar>
PatternGradients<Scalar> bptt_gradients(const NetworkSpec& spec, const Weights<Scalar>& w,
                                        const VectorX<Scalar>& rho,
                                        const Sequence<Scalar>& pattern, Scalar gamma) {
  require(pattern.rows() >= 2, ErrorKind::ShapeMismatch, "pattern needs at least 2 frames");
  require(pattern.cols() == spec.io_width(), ErrorKind::ShapeMismatch,
          "pattern width does not match the network");
  require(rho.size() == spec.pb_dim, ErrorKind::ShapeMismatch, "PB state width mismatch");
  require(gamma >= Scalar(0) && gamma <= Scalar(1), ErrorKind::InvalidArgument,
          "closed-loop ratio must lie in [0, 1]");

  const int steps = static_cast<int>(pattern.rows()) - 1;
  const Eigen::Index units = spec.units;
  const VectorX<Scalar> pb = pb_activation(rho);

  // forward, keeping every state and input
  std::vector<NetworkState<Scalar>> states;
  states.reserve(steps + 1);
  states.push_back(init_state<Scalar>(spec));
  std::vector<VectorX<Scalar>> inputs(steps);
  PatternGradients<Scalar> g;
  for (int s = 0; s < steps; ++s) {
    if (s == 0) {
      inputs[s] = pattern.row(0).transpose();
    } else {
      const VectorX<Scalar> teacher = pattern.row(s).transpose();
      inputs[s] = mix_input<Scalar>(&teacher, states.back().y_out, gamma);
    }
    states.push_back(step(spec, w, states.back(), inputs[s], pb));
  }
  g.loss = kl_loss(
      [&] {
        Sequence<Scalar> pred(steps, spec.io_width());
        for (int s = 0; s < steps; ++s) pred.row(s) = states[s + 1].y_out.transpose();
        return pred;
      }(),
      pattern.bottomRows(steps));

  // backward
  g.weights = Weights<Scalar>::zeros(spec);
  auto& gw = g.weights;
  VectorX<Scalar> d_pb = VectorX<Scalar>::Zero(spec.pb_dim);
  VectorX<Scalar> du_fast = VectorX<Scalar>::Zero(spec.fast);
  VectorX<Scalar> du_middle = VectorX<Scalar>::Zero(spec.middle);
  VectorX<Scalar> du_slow = VectorX<Scalar>::Zero(spec.slow);
  VectorX<Scalar> dnet_fast = du_fast, dnet_middle = du_middle, dnet_slow = du_slow;
  VectorX<Scalar> d_input = VectorX<Scalar>::Zero(spec.io_width());
  const Scalar leak_fast = Scalar(1) - Scalar(1) / Scalar(spec.tau_fast);
  const Scalar leak_middle = Scalar(1) - Scalar(1) / Scalar(spec.tau_middle);
  const Scalar leak_slow = Scalar(1) - Scalar(1) / Scalar(spec.tau_slow);

  for (int s = steps - 1; s >= 0; --s) {
    const auto& cur = states[s + 1];
    const auto& prev = states[s];
    const auto target = pattern.row(s + 1).transpose();

    // d loss / d u_out for a per-group softmax under KL: o * sum_group(target) - target
    VectorX<Scalar> du_out(spec.io_width());
    for (Eigen::Index start = 0; start < du_out.size(); start += units) {
      const Scalar mass = target.segment(start, units).sum();
      du_out.segment(start, units) =
          cur.y_out.segment(start, units) * mass - target.segment(start, units);
    }
    if (s + 1 < steps && gamma > Scalar(0)) {
      du_out += detail::group_softmax_backward<Scalar>(cur.y_out, gamma * d_input, units);
    }

    gw.out_fast.noalias() += du_out * cur.y_fast.transpose();
    gw.out_bias.col(0) += du_out;

    const VectorX<Scalar> gy_fast = w.out_fast.transpose() * du_out +
                                    w.fast_fast.transpose() * dnet_fast +
                                    w.middle_fast.transpose() * dnet_middle;
    const VectorX<Scalar> gy_middle = w.fast_middle.transpose() * dnet_fast +
                                      w.middle_middle.transpose() * dnet_middle +
                                      w.slow_middle.transpose() * dnet_slow;
    const VectorX<Scalar> gy_slow =
        w.middle_slow.transpose() * dnet_middle + w.slow_slow.transpose() * dnet_slow;

    du_fast = (gy_fast.array() * (Scalar(1) - cur.y_fast.array().square())).matrix() +
              leak_fast * du_fast;
    du_middle = (gy_middle.array() * (Scalar(1) - cur.y_middle.array().square())).matrix() +
                leak_middle * du_middle;
    du_slow = (gy_slow.array() * (Scalar(1) - cur.y_slow.array().square())).matrix() +
              leak_slow * du_slow;
    dnet_fast = du_fast / Scalar(spec.tau_fast);
    dnet_middle = du_middle / Scalar(spec.tau_middle);
    dnet_slow = du_slow / Scalar(spec.tau_slow);

    gw.fast_in.noalias() += dnet_fast * inputs[s].transpose();
    gw.fast_fast.noalias() += dnet_fast * prev.y_fast.transpose();
    gw.fast_middle.noalias() += dnet_fast * prev.y_middle.transpose();
    gw.fast_pb.noalias() += dnet_fast * pb.transpose();
    gw.fast_bias.col(0) += dnet_fast;
    gw.middle_fast.noalias() += dnet_middle * prev.y_fast.transpose();
    gw.middle_middle.noalias() += dnet_middle * prev.y_middle.transpose();
    gw.middle_slow.noalias() += dnet_middle * prev.y_slow.transpose();
    gw.middle_pb.noalias() += dnet_middle * pb.transpose();
    gw.middle_bias.col(0) += dnet_middle;
    gw.slow_middle.noalias() += dnet_slow * prev.y_middle.transpose();
    gw.slow_slow.noalias() += dnet_slow * prev.y_slow.transpose();
    gw.slow_pb.noalias() += dnet_slow * pb.transpose();
    gw.slow_bias.col(0) += dnet_slow;

    d_pb.noalias() += w.fast_pb.transpose() * dnet_fast;
    d_pb.noalias() += w.middle_pb.transpose() * dnet_middle;
    d_pb.noalias() += w.slow_pb.transpose() * dnet_slow;

    d_input.noalias() = w.fast_in.transpose() * dnet_fast;
  }
  g.rho = (d_pb.array() * (Scalar(1) - pb.array().square())).matrix();
  return g;
}

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  Weights<Scalar> m, v;
  MatrixX<Scalar> rho_m, rho_v;
  long step = 0;

  static AdamState fresh(const NetworkSpec& spec, Eigen::Index patterns) {
    AdamState s;
    s.m = Weights<Scalar>::zeros(spec);
    s.v = Weights<Scalar>::zeros(spec);
    s.rho_m.setZero(spec.pb_dim, patterns);
    s.rho_v.setZero(spec.pb_dim, patterns);
    return s;
  }
};

namespace detail {

template <typename Scalar>
void adam_tensor(MatrixX<Scalar>& param, const MatrixX<Scalar>& grad, MatrixX<Scalar>& m,
                 MatrixX<Scalar>& v, const AdamConfig& cfg, Scalar bias1, Scalar bias2) {
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
  param.array() -= Scalar(cfg.learning_rate) * (m.array() / bias1) /
                   ((v.array() / bias2).sqrt() + Scalar(cfg.epsilon));
}

}  // namespace detail

/// One bias-corrected Adam step over all weights and the PB table. Column k of
/// `rho_grad` is pattern k's gradient and only moves pattern k's PB state.
template <typename Scalar>
void adam_update(Weights<Scalar>& weights, MatrixX<Scalar>& rho, const Weights<Scalar>& grads,
                 const MatrixX<Scalar>& rho_grad, AdamState<Scalar>& state,
                 const AdamConfig& cfg) {
  require(rho.rows() == rho_grad.rows() && rho.cols() == rho_grad.cols(),
          ErrorKind::ShapeMismatch, "PB gradient shape mismatch");
  ++state.step;
  const Scalar bias1 = Scalar(1) - std::pow(Scalar(cfg.beta1), Scalar(state.step));
  const Scalar bias2 = Scalar(1) - std::pow(Scalar(cfg.beta2), Scalar(state.step));
  auto params = weights.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t i = 0; i < Weights<Scalar>::kCount; ++i) {
    require(params[i]->rows() == g[i]->rows() && params[i]->cols() == g[i]->cols(),
            ErrorKind::ShapeMismatch, "gradient shape mismatch");
    detail::adam_tensor(*params[i], *g[i], *m[i], *v[i], cfg, bias1, bias2);
  }
  detail::adam_tensor(rho, rho_grad, state.rho_m, state.rho_v, cfg, bias1, bias2);
}

struct TrainingConfig {
  double gamma = 0.5;
  int epochs = 100000;
  AdamConfig adam;
  std::uint64_t seed = 1;
  int checkpoint_interval = 0;  // 0 disables periodic callbacks
  double init_scale = 1.0;      // weights ~ U(-s, s), s = init_scale / sqrt(fan_in)
  int threads = 1;

  void validate() const;
};

struct LearningCurve {
  std::vector<double> loss;
  std::vector<double> seconds;
};

/// Everything needed to regenerate, classify and serve actions.
struct Checkpoint {
  static constexpr const char* kFormat = "novact-ckpt/1";

  NetworkParams<double> params;
  CodecSpec codec;
  TrainingStats stats;
  TrainingConfig config;
  TrainingSet training;
  int epoch = 0;  // 1-based epoch whose parameters are stored
  double loss = 0.0;
};

/// Mean KL per unrolled step per joint group for a total loss over `set`.
double mean_group_kl(double total_loss, const TrainingSet& set);

/// Uniform weights in [-s, s] with s = init_scale / sqrt(fan_in); biases 0.
Weights<double> init_weights(const NetworkSpec& spec, double init_scale, std::uint64_t seed);

struct TrainResult {
  Checkpoint best;
  LearningCurve curve;
};

/// Full-batch training: per epoch, the summed loss over all patterns drives
/// one Adam step. Returns the lowest-loss parameters seen and the whole curve.
/// `on_checkpoint` (if set) receives the best-so-far checkpoint every
/// `checkpoint_interval` epochs.
TrainResult train(const TrainingSet& set, const NetworkSpec& spec, const TrainingConfig& config,
                  const std::function<void(const Checkpoint&, const LearningCurve&)>&
                      on_checkpoint = {});

/// As `train`, with an explicit codec (e.g. a non-default sigma).
TrainResult train_with_codec(const TrainingSet& set, const NetworkSpec& spec,
                             const TrainingConfig& config, const CodecSpec& codec,
                             const std::function<void(const Checkpoint&, const LearningCurve&)>&
                                 on_checkpoint = {});

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV `epoch,loss` (plus `seconds` when asked; timing makes the file
/// differ between otherwise identical runs).
void write_learning_curve(const LearningCurve& curve, const std::filesystem::path& path,
                          bool with_seconds = false);

}  // namespace novact

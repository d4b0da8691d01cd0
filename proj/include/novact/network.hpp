#pragma once

#include "novact/core.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace novact {

/// Layer sizes and timescales of the generation module plus the PB width.
///
/// Layers, bottom to top: input buffer (I), fast (F), middle (M), slow (S);
/// the output layer (O) reads F. I and O have `joints * units` neurons and a
/// time constant of 1.
struct NetworkSpec {
  int fast = 40;
  int middle = 20;
  int slow = 10;
  int joints = 8;
  int units = 10;
  int pb_dim = 2;
  double tau_fast = 2.0;
  double tau_middle = 4.0;
  double tau_slow = 8.0;

  int io_width() const { return joints * units; }

  void validate() const {
    require(fast >= 1 && middle >= 1 && slow >= 1, ErrorKind::InvalidArgument,
            "layer sizes must be positive");
    require(joints >= 1 && units >= 2, ErrorKind::InvalidArgument,
            "need joints >= 1 and units >= 2");
    require(pb_dim >= 1, ErrorKind::InvalidArgument, "PB dimension must be at least 1");
    require(tau_fast >= 1.0 && tau_middle >= 1.0 && tau_slow >= 1.0, ErrorKind::InvalidArgument,
            "time constants must be >= 1");
    require(tau_fast <= tau_middle && tau_middle <= tau_slow, ErrorKind::InvalidArgument,
            "time constants must not decrease from fast to slow");
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Weights and biases shared by all patterns. Naming is `<to>_<from>`.
template <typename Scalar>
struct Weights {
  using Matrix = MatrixX<Scalar>;

  Matrix fast_in, fast_fast, fast_middle, fast_pb, fast_bias;
  Matrix middle_fast, middle_middle, middle_slow, middle_pb, middle_bias;
  Matrix slow_middle, slow_slow, slow_pb, slow_bias;
  Matrix out_fast, out_bias;

  static constexpr std::size_t kCount = 16;
  static constexpr std::array<std::string_view, kCount> kNames{
      "fast_in",     "fast_fast",     "fast_middle", "fast_pb",    "fast_bias",  "middle_fast",
      "middle_middle", "middle_slow", "middle_pb",   "middle_bias", "slow_middle", "slow_slow",
      "slow_pb",     "slow_bias",     "out_fast",    "out_bias"};

  std::array<Matrix*, kCount> tensors() {
    return {&fast_in,     &fast_fast,     &fast_middle, &fast_pb,    &fast_bias,  &middle_fast,
            &middle_middle, &middle_slow, &middle_pb,   &middle_bias, &slow_middle, &slow_slow,
            &slow_pb,     &slow_bias,     &out_fast,    &out_bias};
  }
  std::array<const Matrix*, kCount> tensors() const {
    return {&fast_in,     &fast_fast,     &fast_middle, &fast_pb,    &fast_bias,  &middle_fast,
            &middle_middle, &middle_slow, &middle_pb,   &middle_bias, &slow_middle, &slow_slow,
            &slow_pb,     &slow_bias,     &out_fast,    &out_bias};
  }

  /// Incoming connection count of the neurons each tensor feeds.
  static std::array<int, kCount> fan_in(const NetworkSpec& s) {
    const int f = s.io_width() + s.fast + s.middle + s.pb_dim;
    const int m = s.fast + s.middle + s.slow + s.pb_dim;
    const int sl = s.middle + s.slow + s.pb_dim;
    return {f, f, f, f, f, m, m, m, m, m, sl, sl, sl, sl, s.fast, s.fast};
  }

  static Weights zeros(const NetworkSpec& s) {
    const int io = s.io_width();
    Weights w;
    w.fast_in.setZero(s.fast, io);
    w.fast_fast.setZero(s.fast, s.fast);
    w.fast_middle.setZero(s.fast, s.middle);
    w.fast_pb.setZero(s.fast, s.pb_dim);
    w.fast_bias.setZero(s.fast, 1);
    w.middle_fast.setZero(s.middle, s.fast);
    w.middle_middle.setZero(s.middle, s.middle);
    w.middle_slow.setZero(s.middle, s.slow);
    w.middle_pb.setZero(s.middle, s.pb_dim);
    w.middle_bias.setZero(s.middle, 1);
    w.slow_middle.setZero(s.slow, s.middle);
    w.slow_slow.setZero(s.slow, s.slow);
    w.slow_pb.setZero(s.slow, s.pb_dim);
    w.slow_bias.setZero(s.slow, 1);
    w.out_fast.setZero(io, s.fast);
    w.out_bias.setZero(io, 1);
    return w;
  }

  bool matches(const NetworkSpec& s) const {
    const Weights ref = zeros(s);
    const auto mine = tensors();
    const auto theirs = ref.tensors();
    for (std::size_t i = 0; i < kCount; ++i) {
      if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) {
        return false;
      }
    }
    return true;
  }

  bool all_finite() const {
    for (const auto* t : tensors()) {
      if (!t->allFinite()) return false;
    }
    return true;
  }

  template <typename Other>
  Weights<Other> cast() const {
    Weights<Other> out;
    auto dst = out.tensors();
    const auto src = tensors();
    for (std::size_t i = 0; i < kCount; ++i) *dst[i] = src[i]->template cast<Other>();
    return out;
  }
};

/// Per-pattern PB internal states, one column per training pattern.
template <typename Scalar>
struct PBTable {
  std::vector<std::string> labels;
  MatrixX<Scalar> rho;  // pb_dim x patterns

  Eigen::Index size() const { return rho.cols(); }
};

template <typename Scalar>
struct NetworkParams {
  NetworkSpec spec;
  Weights<Scalar> weights;
  PBTable<Scalar> pb;

  void validate() const {
    spec.validate();
    require(weights.matches(spec), ErrorKind::ShapeMismatch, "weight shapes do not match spec");
    require(weights.all_finite(), ErrorKind::NonFinite, "weights contain non-finite values");
    require(pb.rho.rows() == spec.pb_dim, ErrorKind::ShapeMismatch, "PB table width mismatch");
    require(static_cast<Eigen::Index>(pb.labels.size()) == pb.rho.cols(),
            ErrorKind::ShapeMismatch, "one PB vector per labeled pattern required");
    require(pb.rho.allFinite(), ErrorKind::NonFinite, "PB internal states are not finite");
  }
};

/// PB activation: component-wise tanh of the internal state.
template <typename Derived>
VectorX<typename Derived::Scalar> pb_activation(const Eigen::MatrixBase<Derived>& rho) {
  return rho.derived().array().tanh().matrix();
}

/// Softmax applied independently to each consecutive block of `units` entries.
template <typename Derived>
VectorX<typename Derived::Scalar> group_softmax(const Eigen::MatrixBase<Derived>& logits,
                                                Eigen::Index units) {
  using Scalar = typename Derived::Scalar;
  const auto& z = logits.derived();
  VectorX<Scalar> out(z.size());
  for (Eigen::Index start = 0; start < z.size(); start += units) {
    const auto block = z.segment(start, units);
    const Scalar top = block.maxCoeff();
    auto dst = out.segment(start, units);
    dst = (block.array() - top).exp().matrix();
    dst /= dst.sum();
  }
  return out;
}

/// Internal states `u` and activations `y` of every layer at one time step.
/// `y_in` is the input buffer; `y_out` holds the per-joint softmax prediction.
template <typename Scalar>
struct NetworkState {
  VectorX<Scalar> u_fast, u_middle, u_slow, u_out;
  VectorX<Scalar> y_in, y_fast, y_middle, y_slow, y_out;
  int t = 0;
};

/// u = 0 everywhere; tanh layers are therefore 0 and each output block uniform.
template <typename Scalar>
NetworkState<Scalar> init_state(const NetworkSpec& spec) {
  NetworkState<Scalar> s;
  const int io = spec.io_width();
  s.u_fast.setZero(spec.fast);
  s.u_middle.setZero(spec.middle);
  s.u_slow.setZero(spec.slow);
  s.u_out.setZero(io);
  s.y_in.setZero(io);
  s.y_fast.setZero(spec.fast);
  s.y_middle.setZero(spec.middle);
  s.y_slow.setZero(spec.slow);
  s.y_out = VectorX<Scalar>::Constant(io, Scalar(1) / Scalar(spec.units));
  return s;
}

/// Leaky integration u' = (1 - 1/tau) u + (1/tau) net.
template <typename DerivedU, typename DerivedN>
VectorX<typename DerivedU::Scalar> leaky_update(const Eigen::MatrixBase<DerivedU>& u,
                                                const Eigen::MatrixBase<DerivedN>& net,
                                                typename DerivedU::Scalar tau) {
  using Scalar = typename DerivedU::Scalar;
  const Scalar rate = Scalar(1) / tau;
  return ((Scalar(1) - rate) * u.derived() + rate * net.derived()).eval();
}

/// Closed-loop mixing of the next input: gamma * prediction + (1 - gamma) * teacher.
/// The teacher may be omitted only when gamma == 1.
template <typename Scalar>
VectorX<Scalar> mix_input(const VectorX<Scalar>* teacher, const VectorX<Scalar>& prediction,
                          Scalar gamma) {
  require(gamma >= Scalar(0) && gamma <= Scalar(1), ErrorKind::InvalidArgument,
          "closed-loop ratio must lie in [0, 1]");
  if (gamma == Scalar(1)) return prediction;
  require(teacher != nullptr, ErrorKind::MissingTeacher,
          "teacher frame required when the closed-loop ratio is below 1");
  require(teacher->size() == prediction.size(), ErrorKind::ShapeMismatch,
          "teacher and prediction widths differ");
  if (gamma == Scalar(0)) return *teacher;
  return gamma * prediction + (Scalar(1) - gamma) * *teacher;
}

/// Net inputs (the bracketed sum before leaky integration) of the F, M and S
/// layers given the previous state, the current input frame and the PB point.
template <typename Scalar>
struct NetInputs {
  VectorX<Scalar> fast, middle, slow;
};

template <typename Scalar>
NetInputs<Scalar> net_inputs(const Weights<Scalar>& w, const NetworkState<Scalar>& prev,
                             const VectorX<Scalar>& input, const VectorX<Scalar>& pb) {
  NetInputs<Scalar> n;
  n.fast = w.fast_in * input + w.fast_fast * prev.y_fast + w.fast_middle * prev.y_middle +
           w.fast_pb * pb + w.fast_bias;
  n.middle = w.middle_fast * prev.y_fast + w.middle_middle * prev.y_middle +
             w.middle_slow * prev.y_slow + w.middle_pb * pb + w.middle_bias;
  n.slow = w.slow_middle * prev.y_middle + w.slow_slow * prev.y_slow + w.slow_pb * pb +
           w.slow_bias;
  return n;
}

/// One time step. The input frame enters the input buffer, F/M/S integrate
/// their net input with their own time constant, and the output layer
/// (tau = 1, reading the fresh F activation) emits the per-joint softmax
/// prediction of the next frame.
template <typename Scalar>
NetworkState<Scalar> step(const NetworkSpec& spec, const Weights<Scalar>& w,
                          const NetworkState<Scalar>& prev, const VectorX<Scalar>& input,
                          const VectorX<Scalar>& pb) {
  require(input.size() == spec.io_width(), ErrorKind::ShapeMismatch,
          "input frame width does not match the network");
  require(pb.size() == spec.pb_dim, ErrorKind::ShapeMismatch, "PB point width mismatch");
  require(prev.u_fast.size() == spec.fast && prev.u_middle.size() == spec.middle &&
              prev.u_slow.size() == spec.slow,
          ErrorKind::ShapeMismatch, "state does not match the network");

  const auto net = net_inputs(w, prev, input, pb);
  NetworkState<Scalar> next;
  next.t = prev.t + 1;
  next.y_in = input;
  next.u_fast = leaky_update(prev.u_fast, net.fast, Scalar(spec.tau_fast));
  next.u_middle = leaky_update(prev.u_middle, net.middle, Scalar(spec.tau_middle));
  next.u_slow = leaky_update(prev.u_slow, net.slow, Scalar(spec.tau_slow));
  next.y_fast = next.u_fast.array().tanh().matrix();
  next.y_middle = next.u_middle.array().tanh().matrix();
  next.y_slow = next.u_slow.array().tanh().matrix();
  next.u_out = w.out_fast * next.y_fast + w.out_bias;
  next.y_out = group_softmax(next.u_out, spec.units);
  return next;
}

/// Runs `steps` predictions from `initial_input`. Input of step 1 is
/// `initial_input`; input of step t > 1 mixes prediction t-1 with teacher row
/// t-1. The PB point stays fixed for the whole run.
template <typename Scalar>
std::pair<Sequence<Scalar>, NetworkState<Scalar>> generate(
    const NetworkSpec& spec, const Weights<Scalar>& w, const VectorX<Scalar>& pb, int steps,
    Scalar gamma, const VectorX<Scalar>& initial_input,
    const Sequence<Scalar>* teacher = nullptr) {
  require(steps >= 1, ErrorKind::InvalidArgument, "need at least one generation step");
  require(initial_input.size() == spec.io_width(), ErrorKind::ShapeMismatch,
          "initial input width does not match the network");
  if (gamma < Scalar(1)) {
    require(teacher != nullptr, ErrorKind::MissingTeacher,
            "teacher sequence required when the closed-loop ratio is below 1");
    require(teacher->rows() >= steps && teacher->cols() == spec.io_width(),
            ErrorKind::ShapeMismatch, "teacher sequence too short or wrong width");
  }

  Sequence<Scalar> predictions(steps, spec.io_width());
  NetworkState<Scalar> state = init_state<Scalar>(spec);
  VectorX<Scalar> input = initial_input;
  VectorX<Scalar> teacher_row;
  for (int t = 0; t < steps; ++t) {
    if (t > 0) {
      if (teacher != nullptr && gamma < Scalar(1)) {
        teacher_row = teacher->row(t).transpose();
        input = mix_input<Scalar>(&teacher_row, state.y_out, gamma);
      } else {
        input = mix_input<Scalar>(nullptr, state.y_out, gamma);
      }
    }
    state = step(spec, w, state, input, pb);
    predictions.row(t) = state.y_out.transpose();
  }
  return {std::move(predictions), std::move(state)};
}

}  // namespace novact

#pragma once

#include "novact/network.hpp"
#include "novact/rng.hpp"

namespace novact::testing {

inline NetworkSpec tiny_spec() {
  NetworkSpec s;
  s.fast = 4;
  s.middle = 3;
  s.slow = 2;
  s.joints = 2;
  s.units = 3;
  s.pb_dim = 2;
  return s;
}

inline Weights<double> random_weights(const NetworkSpec& spec, double scale, std::uint64_t seed) {
  Rng rng(seed);
  auto w = Weights<double>::zeros(spec);
  for (auto* t : w.tensors()) {
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = rng.uniform(-scale, scale);
  }
  return w;
}

/// Random sequence whose every J-block is a strictly positive probability vector.
inline Sequence<double> random_softmax_sequence(const NetworkSpec& spec, int steps,
                                                std::uint64_t seed) {
  Rng rng(seed);
  Sequence<double> seq(steps, spec.io_width());
  for (int t = 0; t < steps; ++t) {
    VectorX<double> logits(spec.io_width());
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = 2.0 * rng.normal();
    seq.row(t) = group_softmax(logits, spec.units).transpose();
  }
  return seq;
}

}  // namespace novact::testing

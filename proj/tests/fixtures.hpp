#pragma once

#include "novact/trainer.hpp"

namespace novact::testing {

/// Full-size network briefly trained on the synthetic boxing set. Cached per
/// process; a few hundred epochs is enough for structured, non-random output.
inline const Checkpoint& short_trained_checkpoint() {
  static const Checkpoint cp = [] {
    TrainingConfig cfg;
    cfg.epochs = 300;
    cfg.seed = 3;
    return train(synthesize_boxing_set({}), NetworkSpec{}, cfg).best;
  }();
  return cp;
}

}  // namespace novact::testing

#include "orank/experiment.hpp"

namespace orank::experiment {

// Frozen output of `orank tune --seed 0` (12 draws per family, n = 500).
Hyperparameters default_hyperparameters() {
  Hyperparameters hp;
  hp.outcome = {.hidden = 128, .learning_rate = 5e-4, .weight_decay = 0.0, .batch_size = 128};
  hp.propensity = {.hidden = 64, .learning_rate = 1e-3, .weight_decay = 1e-4, .batch_size = 128};
  hp.cate = {.hidden = 128, .learning_rate = 5e-4, .weight_decay = 1e-5, .batch_size = 128};
  hp.ranker = {.hidden = 128, .learning_rate = 3e-4, .weight_decay = 0.0, .batch_size = 256};
  return hp;
}

}  // namespace orank::experiment

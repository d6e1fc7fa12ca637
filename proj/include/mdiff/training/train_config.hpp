#pragma once

#include <cstdint>

#include "mdiff/training/adam.hpp"

namespace mdiff::training {

struct TrainConfig {
  std::int64_t batch_size = 64;
  std::int64_t iterations = 2000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  double clip_norm = 0.0;             // global gradient-norm cap; 0 disables
  std::int64_t log_every = 100;

  // Throws ConfigError unless sizes are positive, lr > 0, 0 <= beta < 1, eps > 0.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace mdiff::training

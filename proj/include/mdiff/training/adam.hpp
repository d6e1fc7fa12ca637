#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mdiff/numerics/tape.hpp"

namespace mdiff::training {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  std::map<std::string, num::DenseArray> m;
  std::map<std::string, num::DenseArray> v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam: t <- t + 1, m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2,
// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps). Moments are created on first use.
// Throws ContractError if the gradient names or shapes differ from the parameters,
// NumericError (naming the parameter) on a non-finite gradient; nothing is updated then.
void adam_step(std::map<std::string, num::DenseArray>& params, const num::Gradients& grads, AdamState& state,
               const AdamConfig& cfg);

// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds max_norm.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_global_norm(num::Gradients& grads, double max_norm);

}  // namespace mdiff::training

#pragma once

#include <atomic>
#include <cstddef>
#include <vector>

#include "mdiff/numerics/tape.hpp"

namespace mdiff::diffusion {

// Inputs for one batched noise prediction: item i is (p_obs[i], p_k[i], steps[i]).
struct DenoiseBatch {
  std::vector<num::DenseArray> p_obs;  // T x D each
  std::vector<num::DenseArray> p_k;    // L x D each
  std::vector<int> steps;

  std::size_t size() const noexcept { return steps.size(); }
};

// eps_theta(P^k, k | P_obs). Implementations record their computation on the
// tape so training can differentiate through it; inference passes a tape with
// gradients disabled. Items must not influence each other.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  // Returns a [B, L, D] node.
  virtual num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const = 0;
};

// Decorator counting per-item denoiser evaluations and batched calls.
class CountingPredictor final : public NoisePredictor {
 public:
  explicit CountingPredictor(const NoisePredictor& inner) : inner_(inner) {}

  num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const override {
    evaluations_ += batch.size();
    ++calls_;
    return inner_.predict(tape, batch);
  }

  std::size_t evaluations() const noexcept { return evaluations_; }
  std::size_t calls() const noexcept { return calls_; }

 private:
  const NoisePredictor& inner_;
  mutable std::atomic<std::size_t> evaluations_{0};
  mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace mdiff::diffusion

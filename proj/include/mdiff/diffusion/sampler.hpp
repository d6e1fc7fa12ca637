#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mdiff/diffusion/predictor.hpp"
#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/numerics/random.hpp"

namespace mdiff::diffusion {

// Supplies the initial state P^K and the per-step noise z of one sample chain.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual num::DenseArray draw(const num::Shape& shape) = 0;
};

class GaussianNoise final : public NoiseSource {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}
  num::DenseArray draw(const num::Shape& shape) override { return rng_.normal_array(shape); }

 private:
  num::Rng rng_;
};

class ZeroNoise final : public NoiseSource {
 public:
  num::DenseArray draw(const num::Shape& shape) override { return num::DenseArray(shape, 0.0); }
};

// Runs the reverse chain k = K..1 for each source: x = source.draw() as P^K, then
// x <- reverse_step(x, k, eps_theta(x, k | p_obs), z) with z drawn fresh for k > 1.
// Chains advance together, one batched model call per step. Returns [N, L, D].
// Throws DivergedSamplingError if a state stops being finite.
num::DenseArray run_reverse_chains(const NoisePredictor& model, const num::DenseArray& p_obs,
                                   std::size_t future_frames, std::span<NoiseSource* const> sources,
                                   const NoiseSchedule& sched);

// N chains; chain i draws everything from its own stream seeded by derive_seed(seed, i),
// so sample i does not depend on N.
num::DenseArray sample_stochastic(const NoisePredictor& model, const num::DenseArray& p_obs,
                                  std::size_t future_frames, std::size_t n_samples, std::uint64_t seed,
                                  const NoiseSchedule& sched);

// One chain with P^K = 0 and z = 0 throughout. Returns L x D.
num::DenseArray sample_deterministic(const NoisePredictor& model, const num::DenseArray& p_obs,
                                     std::size_t future_frames, const NoiseSchedule& sched);

}  // namespace mdiff::diffusion

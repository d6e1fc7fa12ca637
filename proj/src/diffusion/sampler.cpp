#include "mdiff/diffusion/sampler.hpp"

#include <algorithm>

#include "mdiff/diffusion/process.hpp"
#include "mdiff/errors.hpp"

namespace mdiff::diffusion {

num::DenseArray run_reverse_chains(const NoisePredictor& model, const num::DenseArray& p_obs,
                                   std::size_t future_frames, std::span<NoiseSource* const> sources,
                                   const NoiseSchedule& sched) {
  if (sources.empty()) throw ContractError("sampling needs at least one chain");
  if (p_obs.rank() != 2 || p_obs.extent(0) < 1) throw ContractError("sampling needs a T x D observation, T >= 1");
  if (future_frames < 1) throw ContractError("sampling needs L >= 1 future frames");
  const num::Shape state_shape{future_frames, p_obs.extent(1)};
  const std::size_t n = sources.size();

  std::vector<num::DenseArray> states;
  states.reserve(n);
  for (NoiseSource* src : sources) states.push_back(src->draw(state_shape));

  DenoiseBatch batch;
  batch.p_obs.assign(n, p_obs);
  for (int k = sched.steps(); k >= 1; --k) {
    batch.p_k = states;
    batch.steps.assign(n, k);
    num::DenseArray eps_hat;
    try {
      num::Tape tape(false);
      eps_hat = tape.value(model.predict(tape, batch));
    } catch (const NumericError& e) {
      throw DivergedSamplingError(std::string("denoiser produced non-finite output: ") + e.what(), k);
    }
    if (eps_hat.shape() != num::Shape{n, future_frames, p_obs.extent(1)}) {
      throw ContractError("denoiser returned shape " + num::shape_string(eps_hat.shape()));
    }
    const std::size_t block = future_frames * p_obs.extent(1);
    for (std::size_t i = 0; i < n; ++i) {
      num::DenseArray item(state_shape,
                           std::vector<double>(eps_hat.values().begin() + static_cast<std::ptrdiff_t>(i * block),
                                               eps_hat.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * block)));
      const num::DenseArray z = k > 1 ? sources[i]->draw(state_shape) : num::DenseArray();
      states[i] = reverse_step(states[i], k, item, z, sched);
      if (!states[i].all_finite()) throw DivergedSamplingError("reverse process state became non-finite", k);
    }
  }

  num::DenseArray out(num::Shape{n, future_frames, p_obs.extent(1)});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(states[i].values().begin(), states[i].values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(i * states[i].size()));
  }
  return out;
}

num::DenseArray sample_stochastic(const NoisePredictor& model, const num::DenseArray& p_obs,
                                  std::size_t future_frames, std::size_t n_samples, std::uint64_t seed,
                                  const NoiseSchedule& sched) {
  if (n_samples < 1) throw ContractError("stochastic sampling needs N >= 1");
  std::vector<std::unique_ptr<NoiseSource>> owned;
  std::vector<NoiseSource*> sources;
  for (std::size_t i = 0; i < n_samples; ++i) {
    owned.push_back(std::make_unique<GaussianNoise>(num::derive_seed(seed, i)));
    sources.push_back(owned.back().get());
  }
  return run_reverse_chains(model, p_obs, future_frames, sources, sched);
}

num::DenseArray sample_deterministic(const NoisePredictor& model, const num::DenseArray& p_obs,
                                     std::size_t future_frames, const NoiseSchedule& sched) {
  ZeroNoise zero;
  NoiseSource* sources[] = {&zero};
  const num::DenseArray out = run_reverse_chains(model, p_obs, future_frames, sources, sched);
  return out.reshaped({future_frames, p_obs.extent(1)});
}

}  // namespace mdiff::diffusion

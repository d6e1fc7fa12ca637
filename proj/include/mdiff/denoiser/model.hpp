#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mdiff/denoiser/config.hpp"
#include "mdiff/denoiser/encoder_layer.hpp"
#include "mdiff/diffusion/predictor.hpp"

namespace mdiff::denoiser {

using ParameterMap = std::map<std::string, num::DenseArray>;

// Intermediate values of one forward pass, for diagnostics and tests.
struct ForwardTrace {
  num::DenseArray spatial_attention;   // [groups * heads, D, D]
  num::DenseArray temporal_attention;  // [groups * heads, S, S]
  // Parallel variant only: each branch's projected output, sliced like the result.
  num::DenseArray spatial_branch;   // [B, L, D]
  num::DenseArray temporal_branch;  // [B, L, D]
};

// eps_theta(P^k, k | P_obs) as a spatio-temporal transformer.
//
// Every scalar of the stacked (T + L) x D input is a token, projected 1 -> C.
// Temporal and spatial sinusoid encodings and the learned step embedding are
// added once. Series: spatial layer then temporal layer, projection C -> 1.
// Parallel: both layers on the same input, each with its own C -> 1 projection,
// fused per position by weights w[2] and bias b. The last L frames are returned.
class DenoiserModel final : public diffusion::NoisePredictor {
 public:
  // Parameters are initialized from `seed`: weight matrices ~ N(0, 1/fan_in),
  // step embedding ~ N(0, 1), biases 0, layer-norm gains 1, fusion (0.5, 0.5).
  // With zero_output the final projection(s) start at zero, so eps_hat = 0.
  DenoiserModel(DenoiserConfig config, std::uint64_t seed, bool zero_output = true);
  // Adopts the given parameters; names and shapes must match the config exactly.
  DenoiserModel(DenoiserConfig config, ParameterMap params);

  static std::map<std::string, num::Shape> parameter_shapes(const DenoiserConfig& config);
  static std::size_t parameter_count(const DenoiserConfig& config);

  const DenoiserConfig& config() const noexcept { return config_; }
  const ParameterMap& parameters() const noexcept { return params_; }
  // In-place access for optimizers; names and shapes must be preserved.
  ParameterMap& mutable_parameters() noexcept { return params_; }
  num::DenseArray& parameter(const std::string& name);
  const num::DenseArray& parameter(const std::string& name) const;

  num::Var predict(num::Tape& tape, const diffusion::DenoiseBatch& batch) const override;
  num::Var predict_traced(num::Tape& tape, const diffusion::DenoiseBatch& batch, ForwardTrace* trace) const;

  // Single-item inference: L x D.
  num::DenseArray denoise(const num::DenseArray& p_obs, const num::DenseArray& p_k, int k) const;

 private:
  DenoiserConfig config_;
  ParameterMap params_;
};

}  // namespace mdiff::denoiser

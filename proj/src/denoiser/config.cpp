#include "mdiff/denoiser/config.hpp"

#include "mdiff/errors.hpp"

namespace mdiff::denoiser {

std::string to_string(Variant v) { return v == Variant::series ? "series" : "parallel"; }

Variant parse_variant(std::string_view text) {
  if (text == "series") return Variant::series;
  if (text == "parallel") return Variant::parallel;
  throw ConfigError("unknown denoiser variant '" + std::string(text) + "' (expected series or parallel)");
}

void DenoiserConfig::validate() const {
  if (model_dim == 0 || n_heads == 0) throw ConfigError("model_dim and n_heads must be positive");
  if (model_dim % 2 != 0) throw ConfigError("model_dim must be even for sinusoidal encodings");
  if (model_dim % n_heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (obs_frames == 0) throw ConfigError("obs_frames (T) must be at least 1");
  if (future_frames == 0) throw ConfigError("future_frames (L) must be at least 1");
  if (pose_dim == 0) throw ConfigError("pose_dim (D) must be at least 1");
  if (n_steps < 1) throw ConfigError("n_steps (K) must be at least 1");
}

}  // namespace mdiff::denoiser

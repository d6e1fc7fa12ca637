#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace mdiff::denoiser {

enum class Variant { series, parallel };

std::string to_string(Variant v);
// Accepts "series" and "parallel"; throws ConfigError otherwise.
Variant parse_variant(std::string_view text);

struct DenoiserConfig {
  Variant variant = Variant::series;
  std::size_t model_dim = 32;
  std::size_t n_heads = 4;
  std::size_t obs_frames = 16;     // T
  std::size_t future_frames = 20;  // L
  std::size_t pose_dim = 15;       // D
  int n_steps = 20;                // K; the step embedding has K + 1 rows

  std::size_t head_dim() const noexcept { return n_heads == 0 ? 0 : model_dim / n_heads; }
  std::size_t ff_dim() const noexcept { return 4 * model_dim; }
  std::size_t frames() const noexcept { return obs_frames + future_frames; }

  // Throws ConfigError on a zero extent, odd model_dim, or model_dim not divisible by n_heads.
  void validate() const;

  bool operator==(const DenoiserConfig&) const = default;
};

}  // namespace mdiff::denoiser

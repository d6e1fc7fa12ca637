#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mdiff/denoiser/model.hpp"
#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/motion/normalizer.hpp"
#include "mdiff/training/train_config.hpp"

namespace mdiff::training {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  denoiser::DenoiserConfig model_config;
  diffusion::ScheduleParams schedule;
  TrainConfig train;
  motion::Normalizer normalizer;
  denoiser::ParameterMap params;
  AdamState adam;
  std::int64_t iteration = 0;
  std::string rng_state;
  std::vector<double> losses;  // one entry per completed iteration

  bool operator==(const Checkpoint&) const = default;
};

// CKPT1: one JSON manifest line (format, version, configs, iteration, RNG state,
// tensor index with name, shape, byte offset, length and CRC32), then the tensors
// as concatenated little-endian float64 blobs. Offsets count from the blob start.
std::string encode_checkpoint(const Checkpoint& ckpt);
// ParseError on a malformed manifest, ConfigError on a version mismatch,
// IntegrityError on a length or checksum failure.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ConfigError naming the first differing field.
void require_compatible(const Checkpoint& ckpt, const denoiser::DenoiserConfig& model,
                        const diffusion::ScheduleParams& schedule);

denoiser::DenoiserModel model_from(const Checkpoint& ckpt);

}  // namespace mdiff::training

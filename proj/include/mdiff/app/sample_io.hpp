#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "mdiff/metrics/metrics.hpp"

namespace mdiff::app {

// Predictions for one task, in pose units.
struct SampleFile {
  std::string task;
  std::string mode;                   // "stochastic" or "deterministic"
  std::optional<std::uint64_t> seed;  // absent for deterministic runs
  metrics::SampleSet set;
};

// SSET1: one JSON header line
//   {"format":"SSET1","version":1,"task":..,"mode":..,"seed":<int|null>,"N":..,"L":..,"D":..,
//    "fps":..,"gt_shape":[L,D]|null}
// then N*L*D little-endian float64 samples and, when gt_shape is set, the
// ground truth. The ground-truth shape is stored separately so that a file
// whose truth does not fit its samples can still be read and reported.
std::string encode_samples(const SampleFile& file);
SampleFile decode_samples(std::string_view bytes);

void save_samples(const std::filesystem::path& path, const SampleFile& file);
SampleFile load_samples(const std::filesystem::path& path);

}  // namespace mdiff::app

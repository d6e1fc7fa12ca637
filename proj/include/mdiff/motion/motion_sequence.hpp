#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::motion {

enum class Representation { euler, axis_angle, xyz };

std::string_view to_string(Representation repr);
Representation parse_representation(std::string_view text);

// F x D pose matrix. D = 3n for n joints; angles in radians, positions in meters.
struct MotionSequence {
  num::DenseArray frames;
  double fps = 25.0;
  Representation representation = Representation::euler;
  std::optional<std::string> action_label;

  std::size_t frame_count() const { return frames.rank() == 2 ? frames.extent(0) : 0; }
  std::size_t pose_dim() const { return frames.rank() == 2 ? frames.extent(1) : 0; }

  // Throws ContractError unless F >= 1, D is a positive multiple of 3, fps > 0,
  // and every value is finite.
  void validate() const;
};

// Observation window and (optionally) the future it should predict.
struct PredictionTask {
  num::DenseArray p_obs;                  // T x D
  std::optional<num::DenseArray> p_gt;    // L x D

  std::size_t obs_frames() const { return p_obs.extent(0); }
  std::size_t pose_dim() const { return p_obs.extent(1); }
  std::size_t future_frames() const { return p_gt ? p_gt->extent(0) : 0; }

  void validate() const;
};

}  // namespace mdiff::motion

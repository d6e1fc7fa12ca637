#include "mdiff/motion/motion_sequence.hpp"

#include "mdiff/errors.hpp"

namespace mdiff::motion {

std::string_view to_string(Representation repr) {
  switch (repr) {
    case Representation::euler:
      return "euler";
    case Representation::axis_angle:
      return "axis-angle";
    case Representation::xyz:
      return "xyz";
  }
  return "euler";
}

Representation parse_representation(std::string_view text) {
  if (text == "euler") return Representation::euler;
  if (text == "axis-angle") return Representation::axis_angle;
  if (text == "xyz") return Representation::xyz;
  throw ConfigError("unknown pose representation '" + std::string(text) + "'");
}

void MotionSequence::validate() const {
  if (frames.rank() != 2 || frames.extent(0) < 1) {
    throw ContractError("motion sequence needs at least one frame, got shape " + num::shape_string(frames.shape()));
  }
  if (frames.extent(1) == 0 || frames.extent(1) % 3 != 0) {
    throw ContractError("pose dimension " + std::to_string(frames.extent(1)) + " is not a positive multiple of 3");
  }
  if (!(fps > 0.0)) throw ContractError("fps must be positive");
  if (!frames.all_finite()) throw ContractError("motion sequence holds non-finite values");
}

void PredictionTask::validate() const {
  if (p_obs.rank() != 2 || p_obs.extent(0) < 1) throw ContractError("task observation needs T >= 1 frames");
  if (p_gt) {
    if (p_gt->rank() != 2 || p_gt->extent(0) < 1) throw ContractError("task future needs L >= 1 frames");
    if (p_gt->extent(1) != p_obs.extent(1)) {
      throw ContractError("observation has " + std::to_string(p_obs.extent(1)) + " columns, future has " +
                          std::to_string(p_gt->extent(1)));
    }
  }
}

}  // namespace mdiff::motion

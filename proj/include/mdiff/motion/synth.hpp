#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mdiff/motion/motion_sequence.hpp"

namespace mdiff::motion {

enum class Action { walk, idle, wave };

Action parse_action(std::string_view name);
std::string_view to_string(Action action);

// Frequency range in Hz of the sinusoids generated for an action.
struct FrequencyBand {
  double lo;
  double hi;
};
FrequencyBand frequency_band(Action action);

struct SynthConfig {
  std::size_t n_joints = 5;
  std::size_t n_sequences = 40;
  std::size_t frames_per_sequence = 120;
  double fps = 25.0;
  std::vector<std::string> action_mix{"walk", "idle", "wave"};
  std::uint64_t seed = 0;
  // Upper bound on the summed sinusoid amplitude per pose parameter (radians).
  double amplitude = 0.5;
  // Upper bound on the linear drift rate per pose parameter (radians per second).
  double drift = 0.05;
};

// Synthetic euler-angle motion. Each pose parameter d of joint j follows
//   x_d(t) = c_d + sum_h a_{d,h} sin(2 pi f_{j,h} t / fps + phi_{d,h}) + r_d t / fps
// with two harmonics whose frequencies f_{j,h} are drawn from the action's band,
// sum_h a_{d,h} = amplitude and |r_d| <= drift. Frame-to-frame steps are therefore
// bounded by (2 pi f_hi amplitude + drift) / fps. Output is a pure function of cfg.
std::vector<MotionSequence> synth_dataset(const SynthConfig& cfg);

}  // namespace mdiff::motion

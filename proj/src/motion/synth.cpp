#include "mdiff/motion/synth.hpp"

#include <cmath>
#include <numbers>

#include "mdiff/errors.hpp"
#include "mdiff/numerics/random.hpp"

namespace mdiff::motion {

Action parse_action(std::string_view name) {
  if (name == "walk") return Action::walk;
  if (name == "idle") return Action::idle;
  if (name == "wave") return Action::wave;
  throw ConfigError("unknown action '" + std::string(name) + "' in action_mix (expected walk, idle or wave)");
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::walk:
      return "walk";
    case Action::idle:
      return "idle";
    case Action::wave:
      return "wave";
  }
  return "walk";
}

FrequencyBand frequency_band(Action action) {
  switch (action) {
    case Action::walk:
      return {1.0, 2.0};
    case Action::idle:
      return {0.1, 0.3};
    case Action::wave:
      return {2.0, 4.0};
  }
  return {1.0, 2.0};
}

std::vector<MotionSequence> synth_dataset(const SynthConfig& cfg) {
  if (cfg.action_mix.empty()) throw ConfigError("action_mix is empty");
  std::vector<Action> actions;
  for (const std::string& name : cfg.action_mix) actions.push_back(parse_action(name));
  if (cfg.n_joints < 2) throw ConfigError("n_joints must be at least 2");
  if (cfg.frames_per_sequence < 2) throw ConfigError("frames_per_sequence must be at least 2");
  if (!(cfg.fps > 0.0)) throw ConfigError("fps must be positive");
  if (!(cfg.amplitude >= 0.0) || !(cfg.drift >= 0.0)) throw ConfigError("amplitude and drift must be non-negative");

  constexpr std::size_t kHarmonics = 2;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::size_t dim = 3 * cfg.n_joints;
  num::Rng rng(cfg.seed);

  std::vector<MotionSequence> out;
  out.reserve(cfg.n_sequences);
  for (std::size_t s = 0; s < cfg.n_sequences; ++s) {
    const Action action = actions[rng.uniform_index(actions.size())];
    const FrequencyBand band = frequency_band(action);

    std::vector<double> freq(cfg.n_joints * kHarmonics);
    for (double& f : freq) f = band.lo + (band.hi - band.lo) * rng.uniform();

    std::vector<double> amp(dim * kHarmonics), phase(dim * kHarmonics), offset(dim), rate(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const double w = 0.5 + 0.5 * rng.uniform();
      amp[d * kHarmonics] = cfg.amplitude * w;
      amp[d * kHarmonics + 1] = cfg.amplitude * (1.0 - w);
      for (std::size_t h = 0; h < kHarmonics; ++h) phase[d * kHarmonics + h] = kTwoPi * rng.uniform();
      offset[d] = cfg.amplitude * (2.0 * rng.uniform() - 1.0);
      rate[d] = cfg.drift * (2.0 * rng.uniform() - 1.0);
    }

    num::DenseArray frames(num::Shape{cfg.frames_per_sequence, dim});
    for (std::size_t t = 0; t < cfg.frames_per_sequence; ++t) {
      const double seconds = static_cast<double>(t) / cfg.fps;
      for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t joint = d / 3;
        double v = offset[d] + rate[d] * seconds;
        for (std::size_t h = 0; h < kHarmonics; ++h) {
          v += amp[d * kHarmonics + h] *
               std::sin(kTwoPi * freq[joint * kHarmonics + h] * seconds + phase[d * kHarmonics + h]);
        }
        frames.at(t, d) = v;
      }
    }
    out.push_back(MotionSequence{std::move(frames), cfg.fps, Representation::euler, std::string(to_string(action))});
  }
  return out;
}

}  // namespace mdiff::motion

#include "mdiff/motion/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdiff/errors.hpp"
#include "mdiff/numerics/random.hpp"

namespace mdiff::motion {

std::vector<PredictionTask> window_split(const MotionSequence& seq, std::size_t obs_frames,
                                         std::size_t future_frames, std::size_t stride) {
  if (obs_frames < 1 || future_frames < 1) throw ConfigError("window needs T >= 1 and L >= 1");
  if (stride < 1) throw ConfigError("window stride must be at least 1");
  std::vector<PredictionTask> tasks;
  const std::size_t total = seq.frame_count();
  const std::size_t span = obs_frames + future_frames;
  if (span > total) return tasks;
  for (std::size_t start = 0; start + span <= total; start += stride) {
    tasks.push_back(PredictionTask{num::slice_rows(seq.frames, start, obs_frames),
                                   num::slice_rows(seq.frames, start + obs_frames, future_frames)});
  }
  return tasks;
}

IndexSplit split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must be in (0, 1]");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  num::Rng rng(seed);
  // Fisher-Yates with the portable index generator.
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  if (count >= 2) n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
  n_train = std::min(n_train, count);

  IndexSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

SequenceSplit split_sequences(const std::vector<MotionSequence>& sequences, double train_fraction,
                              std::uint64_t seed) {
  const IndexSplit idx = split_indices(sequences.size(), train_fraction, seed);
  SequenceSplit split;
  for (std::size_t i : idx.train) split.train.push_back(sequences[i]);
  for (std::size_t i : idx.test) split.test.push_back(sequences[i]);
  return split;
}

}  // namespace mdiff::motion

#pragma once

#include <cstdint>
#include <vector>

#include "mdiff/motion/motion_sequence.hpp"

namespace mdiff::motion {

// Cuts (T observed, L future) windows starting at 0, stride, 2*stride, ...
// Returns an empty list when T + L exceeds the sequence length.
std::vector<PredictionTask> window_split(const MotionSequence& seq, std::size_t obs_frames,
                                         std::size_t future_frames, std::size_t stride);

struct SequenceSplit {
  std::vector<MotionSequence> train;
  std::vector<MotionSequence> test;
};

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..count-1, the first round(train_fraction * count) going to
// train. At least one index lands in each part when count >= 2.
IndexSplit split_indices(std::size_t count, double train_fraction, std::uint64_t seed);

// split_indices applied to whole sequences, never to windows.
SequenceSplit split_sequences(const std::vector<MotionSequence>& sequences, double train_fraction,
                              std::uint64_t seed);

}  // namespace mdiff::motion

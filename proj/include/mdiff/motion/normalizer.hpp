#pragma once

#include <span>
#include <vector>

#include "mdiff/motion/motion_sequence.hpp"

namespace mdiff::motion {

inline constexpr double kMinStd = 1e-8;

// Per-dimension z-score. Statistics come from the training split only.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(num::DenseArray mean, num::DenseArray std);

  // Pools every observed and future frame of the given tasks. std is clamped to kMinStd.
  static Normalizer fit(std::span<const PredictionTask> train_tasks);

  const num::DenseArray& mean() const noexcept { return mean_; }
  const num::DenseArray& std() const noexcept { return std_; }
  std::size_t dim() const noexcept { return mean_.size(); }

  // Row-wise transform of an [F x D] array; the shape is unchanged.
  num::DenseArray apply(const num::DenseArray& frames) const;
  num::DenseArray invert(const num::DenseArray& frames) const;
  PredictionTask apply(const PredictionTask& task) const;

  bool operator==(const Normalizer&) const = default;

 private:
  void check_columns(const num::DenseArray& frames) const;

  num::DenseArray mean_;
  num::DenseArray std_;
};

}  // namespace mdiff::motion

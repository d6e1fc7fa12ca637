#include "mdiff/motion/normalizer.hpp"

#include <algorithm>
#include <cmath>

#include "mdiff/errors.hpp"

namespace mdiff::motion {

Normalizer::Normalizer(num::DenseArray mean, num::DenseArray std) : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size() || mean_.size() == 0) {
    throw ConfigError("normalizer mean/std must be non-empty and equally long");
  }
  for (double& s : std_.values()) s = std::max(s, kMinStd);
}

Normalizer Normalizer::fit(std::span<const PredictionTask> train_tasks) {
  if (train_tasks.empty()) throw ConfigError("cannot fit a normalizer on an empty training set");
  const std::size_t dim = train_tasks.front().pose_dim();

  std::vector<const num::DenseArray*> blocks;
  for (const PredictionTask& task : train_tasks) {
    if (task.pose_dim() != dim) throw DimensionError("training tasks disagree on pose dimension");
    blocks.push_back(&task.p_obs);
    if (task.p_gt) blocks.push_back(&*task.p_gt);
  }

  // Two passes (mean, then centered second moment) for accuracy.
  num::DenseArray mean(num::Shape{dim}, 0.0);
  double count = 0.0;
  for (const num::DenseArray* b : blocks) {
    for (std::size_t r = 0; r < b->rows(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += b->at(r, d);
    }
    count += static_cast<double>(b->rows());
  }
  for (double& m : mean.values()) m /= count;

  num::DenseArray std(num::Shape{dim}, 0.0);
  for (const num::DenseArray* b : blocks) {
    for (std::size_t r = 0; r < b->rows(); ++r) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = b->at(r, d) - mean[d];
        std[d] += c * c;
      }
    }
  }
  for (double& s : std.values()) s = std::sqrt(s / count);
  return Normalizer(std::move(mean), std::move(std));
}

void Normalizer::check_columns(const num::DenseArray& frames) const {
  if (frames.cols() != dim()) {
    throw DimensionError("normalizer has " + std::to_string(dim()) + " dimensions, data has " +
                         std::to_string(frames.cols()));
  }
}

num::DenseArray Normalizer::apply(const num::DenseArray& frames) const {
  check_columns(frames);
  num::DenseArray out = frames;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t d = 0; d < dim(); ++d) out.at(r, d) = (out.at(r, d) - mean_[d]) / std_[d];
  }
  return out;
}

num::DenseArray Normalizer::invert(const num::DenseArray& frames) const {
  check_columns(frames);
  num::DenseArray out = frames;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t d = 0; d < dim(); ++d) out.at(r, d) = out.at(r, d) * std_[d] + mean_[d];
  }
  return out;
}

PredictionTask Normalizer::apply(const PredictionTask& task) const {
  PredictionTask out{apply(task.p_obs), std::nullopt};
  if (task.p_gt) out.p_gt = apply(*task.p_gt);
  return out;
}

}  // namespace mdiff::motion

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mdiff/denoiser/model.hpp"
#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/motion/motion_sequence.hpp"
#include "mdiff/motion/normalizer.hpp"
#include "mdiff/numerics/random.hpp"
#include "mdiff/training/checkpoint.hpp"
#include "mdiff/training/train_config.hpp"

namespace mdiff::training {

inline constexpr double kDivergenceLoss = 1e6;

// Raised when the loss exceeds kDivergenceLoss or turns non-finite. Carries the
// state from before the failing iteration.
class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(const std::string& what, std::int64_t iteration, Checkpoint last_good)
      : NumericError(what), iteration_(iteration), last_good_(std::move(last_good)) {}

  std::int64_t iteration() const noexcept { return iteration_; }
  const Checkpoint& last_good() const noexcept { return last_good_; }

 private:
  std::int64_t iteration_;
  Checkpoint last_good_;
};

// Minimizes the mean-reduced noise-prediction loss with Adam.
//
// Tasks are given in pose units and normalized with the supplied normalizer.
// The model is initialized from derive_seed(seed, 0); every iteration then draws,
// from the root stream derive_seed(seed, 1), batch_size items as (task index
// with replacement, k uniform in 1..K, eps ~ N(0, I)) in that order per item.
class Trainer {
 public:
  Trainer(std::vector<motion::PredictionTask> tasks, const denoiser::DenoiserConfig& model_config,
          const diffusion::ScheduleParams& schedule, motion::Normalizer normalizer, TrainConfig config);

  // Continues from a checkpoint. `config` may change iterations, checkpoint_every
  // and log_every; anything else that differs is a ConfigError.
  Trainer(std::vector<motion::PredictionTask> tasks, const Checkpoint& from, TrainConfig config);

  // One iteration; returns its loss. Throws TrainingDivergedError.
  double step();
  // Steps until iteration() == config().iterations; `on_step` runs after each one.
  void run(const std::function<void(const Trainer&)>& on_step = {});

  Checkpoint checkpoint() const;

  const denoiser::DenoiserModel& model() const noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }
  const diffusion::NoiseSchedule& schedule() const noexcept { return sched_; }
  std::int64_t iteration() const noexcept { return iteration_; }
  const std::vector<double>& losses() const noexcept { return losses_; }
  // Gradients of the last completed step.
  const num::Gradients& last_gradients() const noexcept { return last_grads_; }

 private:
  Checkpoint snapshot(const std::string& rng_state) const;

  std::vector<motion::PredictionTask> tasks_;
  motion::Normalizer normalizer_;
  diffusion::NoiseSchedule sched_;
  TrainConfig config_;
  denoiser::DenoiserModel model_;
  AdamState adam_;
  num::Rng rng_;
  std::int64_t iteration_ = 0;
  std::vector<double> losses_;
  num::Gradients last_grads_;
};

// Rows "iteration,loss" with one row per complete window of `every` iterations:
// the iteration number closing the window and the window's mean loss (%.17g).
std::string format_loss_log(std::span<const double> losses, std::int64_t every);

}  // namespace mdiff::training

#include "mdiff/training/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "mdiff/diffusion/loss.hpp"

namespace mdiff::training {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  if (log_every < 1) throw ConfigError("log_every must be at least 1");
}

namespace {

std::vector<motion::PredictionTask> normalize_all(std::vector<motion::PredictionTask> tasks,
                                                  const motion::Normalizer& norm) {
  if (tasks.empty()) throw ConfigError("training needs at least one task");
  for (auto& t : tasks) {
    if (!t.p_gt) throw ContractError("training tasks need ground-truth future frames");
    t = norm.apply(t);
  }
  return tasks;
}

}  // namespace

Trainer::Trainer(std::vector<motion::PredictionTask> tasks, const denoiser::DenoiserConfig& model_config,
                 const diffusion::ScheduleParams& schedule, motion::Normalizer normalizer, TrainConfig config)
    : tasks_(normalize_all(std::move(tasks), normalizer)),
      normalizer_(std::move(normalizer)),
      sched_(diffusion::NoiseSchedule::linear(schedule)),
      config_(config),
      model_(model_config, num::derive_seed(config.seed, 0)),
      rng_(num::derive_seed(config.seed, 1)) {
  config_.validate();
  if (model_config.n_steps != schedule.steps) {
    throw ConfigError("denoiser n_steps " + std::to_string(model_config.n_steps) + " differs from schedule K " +
                      std::to_string(schedule.steps));
  }
}

Trainer::Trainer(std::vector<motion::PredictionTask> tasks, const Checkpoint& from, TrainConfig config)
    : tasks_(normalize_all(std::move(tasks), from.normalizer)),
      normalizer_(from.normalizer),
      sched_(diffusion::NoiseSchedule::linear(from.schedule)),
      config_(config),
      model_(model_from(from)),
      adam_(from.adam),
      iteration_(from.iteration),
      losses_(from.losses) {
  config_.validate();
  TrainConfig same = from.train;
  same.iterations = config.iterations;
  same.checkpoint_every = config.checkpoint_every;
  same.log_every = config.log_every;
  if (!(same == config)) {
    throw ConfigError("resume changes training settings other than iterations, checkpoint_every and log_every");
  }
  rng_.set_state(from.rng_state);
}

double Trainer::step() {
  const std::string rng_before = rng_.state();
  const std::size_t b = static_cast<std::size_t>(config_.batch_size);
  std::vector<motion::PredictionTask> batch;
  std::vector<int> steps;
  std::vector<num::DenseArray> eps;
  batch.reserve(b);
  steps.reserve(b);
  eps.reserve(b);
  const num::Shape future{model_.config().future_frames, model_.config().pose_dim};
  for (std::size_t i = 0; i < b; ++i) {
    batch.push_back(tasks_[rng_.uniform_index(tasks_.size())]);
    steps.push_back(1 + static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(sched_.steps()))));
    eps.push_back(rng_.normal_array(future));
  }

  double loss = 0.0;
  num::Gradients grads;
  try {
    num::Tape tape;
    const num::Var l = diffusion::diffusion_loss(tape, model_, batch, steps, eps, sched_);
    loss = tape.value(l).item();
    if (!(loss <= kDivergenceLoss)) throw NumericError("loss " + std::to_string(loss) + " exceeds the divergence bound");
    grads = tape.backward(l);
    if (config_.clip_norm > 0.0) clip_global_norm(grads, config_.clip_norm);
    denoiser::ParameterMap updated = model_.parameters();
    AdamState adam = adam_;
    adam_step(updated, grads, adam, config_.adam);
    for (const auto& [name, v] : updated) {
      if (!v.all_finite()) throw NumericError("parameter '" + name + "' became non-finite");
    }
    model_.mutable_parameters() = std::move(updated);
    adam_ = std::move(adam);
  } catch (const NumericError& e) {
    throw TrainingDivergedError("training diverged at iteration " + std::to_string(iteration_ + 1) + ": " + e.what(),
                                iteration_ + 1, snapshot(rng_before));
  }
  ++iteration_;
  losses_.push_back(loss);
  last_grads_ = std::move(grads);
  return loss;
}

void Trainer::run(const std::function<void(const Trainer&)>& on_step) {
  while (iteration_ < config_.iterations) {
    step();
    if (on_step) on_step(*this);
  }
}

Checkpoint Trainer::snapshot(const std::string& rng_state) const {
  Checkpoint ck;
  ck.model_config = model_.config();
  ck.schedule = sched_.params();
  ck.train = config_;
  ck.normalizer = normalizer_;
  ck.params = model_.parameters();
  ck.adam = adam_;
  ck.iteration = iteration_;
  ck.rng_state = rng_state;
  ck.losses = losses_;
  return ck;
}

Checkpoint Trainer::checkpoint() const { return snapshot(rng_.state()); }

std::string format_loss_log(std::span<const double> losses, std::int64_t every) {
  if (every < 1) throw ConfigError("loss log interval must be at least 1");
  std::string out = "iteration,loss\n";
  const std::size_t w = static_cast<std::size_t>(every);
  char buf[64];
  for (std::size_t end = w; end <= losses.size(); end += w) {
    double s = 0.0;
    for (std::size_t i = end - w; i < end; ++i) s += losses[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", end, s / static_cast<double>(w));
    out += buf;
  }
  return out;
}

}  // namespace mdiff::training

#include "mdiff/diffusion/loss.hpp"

#include "mdiff/diffusion/process.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/numerics/ops.hpp"

namespace mdiff::diffusion {

num::Var diffusion_loss(num::Tape& tape, const NoisePredictor& model, std::span<const motion::PredictionTask> tasks,
                        std::span<const int> steps, std::span<const num::DenseArray> eps,
                        const NoiseSchedule& sched) {
  if (tasks.empty()) throw ContractError("loss over an empty batch");
  if (steps.size() != tasks.size() || eps.size() != tasks.size()) {
    throw ContractError("loss needs one step and one noise draw per task");
  }

  DenoiseBatch batch;
  std::vector<double> target;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const motion::PredictionTask& task = tasks[i];
    if (!task.p_gt) throw ContractError("loss needs ground-truth future frames (task " + std::to_string(i) + ")");
    batch.p_obs.push_back(task.p_obs);
    batch.p_k.push_back(forward_noise(*task.p_gt, steps[i], eps[i], sched));
    batch.steps.push_back(steps[i]);
    target.insert(target.end(), eps[i].values().begin(), eps[i].values().end());
  }

  const num::Var predicted = model.predict(tape, batch);
  const num::Shape& shape = tape.shape(predicted);
  const num::Var noise = tape.constant(num::DenseArray(shape, std::move(target)));
  const num::Var diff = num::sub(tape, noise, predicted);
  return num::mean(tape, num::mul(tape, diff, diff));
}

num::Var diffusion_loss(num::Tape& tape, const NoisePredictor& model, const motion::PredictionTask& task, int k,
                        const num::DenseArray& eps, const NoiseSchedule& sched) {
  return diffusion_loss(tape, model, std::span<const motion::PredictionTask>(&task, 1), std::span<const int>(&k, 1),
                        std::span<const num::DenseArray>(&eps, 1), sched);
}

}  // namespace mdiff::diffusion

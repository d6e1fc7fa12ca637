#pragma once

#include <span>

#include "mdiff/diffusion/predictor.hpp"
#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/motion/motion_sequence.hpp"

namespace mdiff::diffusion {

// Simplified conditional objective, mean-reduced:
//   mean over items and L*D entries of (eps - eps_theta(forward_noise(p_gt, k, eps), k | p_obs))^2.
// Each item brings its own step and noise draw. Returns a scalar node ready for backward().
num::Var diffusion_loss(num::Tape& tape, const NoisePredictor& model, std::span<const motion::PredictionTask> tasks,
                        std::span<const int> steps, std::span<const num::DenseArray> eps,
                        const NoiseSchedule& sched);

// Single-task convenience form.
num::Var diffusion_loss(num::Tape& tape, const NoisePredictor& model, const motion::PredictionTask& task, int k,
                        const num::DenseArray& eps, const NoiseSchedule& sched);

}  // namespace mdiff::diffusion

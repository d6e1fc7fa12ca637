#pragma once

#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::diffusion {

// Closed-form noising: sqrt(alpha_k) x0 + sqrt(1 - alpha_k) eps.
num::DenseArray forward_noise(const num::DenseArray& x0, int k, const num::DenseArray& eps,
                              const NoiseSchedule& sched);

// Reverse-process mean from a noise estimate:
// (x_k - beta_k / sqrt(1 - alpha_k) * eps_hat) / sqrt(alpha_hat_k).
num::DenseArray mu_theta(const num::DenseArray& x_k, int k, const num::DenseArray& eps_hat,
                         const NoiseSchedule& sched);

// mu_theta + sigma(k) z. At k = 1 the variance is zero and z is not read.
num::DenseArray reverse_step(const num::DenseArray& x_k, int k, const num::DenseArray& eps_hat,
                             const num::DenseArray& z, const NoiseSchedule& sched);

}  // namespace mdiff::diffusion

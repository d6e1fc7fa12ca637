#include "mdiff/diffusion/process.hpp"

#include <cmath>

#include "mdiff/errors.hpp"

namespace mdiff::diffusion {

namespace {

void require_same_shape(const num::DenseArray& a, const num::DenseArray& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(what) + ": shapes " + num::shape_string(a.shape()) + " and " +
                        num::shape_string(b.shape()) + " differ");
  }
}

}  // namespace

num::DenseArray forward_noise(const num::DenseArray& x0, int k, const num::DenseArray& eps,
                              const NoiseSchedule& sched) {
  sched.check_step(k);
  require_same_shape(x0, eps, "forward_noise");
  const double a = std::sqrt(sched.alpha_cumprod(k));
  const double b = std::sqrt(1.0 - sched.alpha_cumprod(k));
  num::DenseArray out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

num::DenseArray mu_theta(const num::DenseArray& x_k, int k, const num::DenseArray& eps_hat,
                         const NoiseSchedule& sched) {
  sched.check_step(k);
  require_same_shape(x_k, eps_hat, "mu_theta");
  const double coef = sched.beta(k) / std::sqrt(1.0 - sched.alpha_cumprod(k));
  const double inv = 1.0 / std::sqrt(sched.alpha_hat(k));
  num::DenseArray out(x_k.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv * (x_k[i] - coef * eps_hat[i]);
  return out;
}

num::DenseArray reverse_step(const num::DenseArray& x_k, int k, const num::DenseArray& eps_hat,
                             const num::DenseArray& z, const NoiseSchedule& sched) {
  num::DenseArray out = mu_theta(x_k, k, eps_hat, sched);
  if (k == 1) return out;
  require_same_shape(x_k, z, "reverse_step");
  const double s = sched.sigma(k);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * z[i];
  return out;
}

}  // namespace mdiff::diffusion

#include "mdiff/diffusion/schedule.hpp"

#include <cmath>
#include <string>

#include "mdiff/errors.hpp"

namespace mdiff::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("diffusion needs at least one step, got " + std::to_string(steps));
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ConfigError("beta bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.params_ = {steps, beta_min, beta_max};
  s.beta_.resize(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(k - 1) / static_cast<double>(steps - 1);
    s.beta_[static_cast<std::size_t>(k - 1)] = std::lerp(beta_min, beta_max, t);
  }
  s.alpha_hat_.resize(s.beta_.size());
  s.alpha_cumprod_.assign(1, 1.0);
  s.sigma2_.resize(s.beta_.size());
  for (std::size_t i = 0; i < s.beta_.size(); ++i) {
    s.alpha_hat_[i] = 1.0 - s.beta_[i];
    s.alpha_cumprod_.push_back(s.alpha_cumprod_.back() * s.alpha_hat_[i]);
    s.sigma2_[i] = (1.0 - s.alpha_cumprod_[i]) / (1.0 - s.alpha_cumprod_[i + 1]) * s.beta_[i];
  }
  return s;
}

void NoiseSchedule::check_step(int k) const {
  if (k < 1 || k > steps()) {
    throw ContractError("diffusion step " + std::to_string(k) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(int k) const {
  check_step(k);
  return beta_[static_cast<std::size_t>(k - 1)];
}

double NoiseSchedule::alpha_hat(int k) const {
  check_step(k);
  return alpha_hat_[static_cast<std::size_t>(k - 1)];
}

double NoiseSchedule::alpha_cumprod(int k) const {
  if (k < 0 || k > steps()) throw ContractError("alpha_cumprod index " + std::to_string(k) + " out of range");
  return alpha_cumprod_[static_cast<std::size_t>(k)];
}

double NoiseSchedule::sigma2(int k) const {
  check_step(k);
  return sigma2_[static_cast<std::size_t>(k - 1)];
}

double NoiseSchedule::sigma(int k) const { return std::sqrt(sigma2(k)); }

}  // namespace mdiff::diffusion

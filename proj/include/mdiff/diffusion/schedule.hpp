#pragma once

#include <vector>

namespace mdiff::diffusion {

struct ScheduleParams {
  int steps = 20;
  double beta_min = 0.001;
  double beta_max = 0.333;

  bool operator==(const ScheduleParams&) const = default;
};

// Linear beta schedule with its derived tables. Steps are indexed 1..K;
// k = 0 stands for clean data (alpha_cumprod(0) = 1).
class NoiseSchedule {
 public:
  // beta_k = beta_min + (k - 1) / (K - 1) * (beta_max - beta_min), exact at both ends.
  static NoiseSchedule linear(int steps, double beta_min, double beta_max);
  static NoiseSchedule linear(const ScheduleParams& params) {
    return linear(params.steps, params.beta_min, params.beta_max);
  }

  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  const ScheduleParams& params() const noexcept { return params_; }

  double beta(int k) const;
  // 1 - beta_k
  double alpha_hat(int k) const;
  // prod_{i <= k} alpha_hat_i, defined for 0 <= k <= K
  double alpha_cumprod(int k) const;
  // ((1 - alpha_cumprod(k-1)) / (1 - alpha_cumprod(k))) * beta_k; zero at k = 1
  double sigma2(int k) const;
  double sigma(int k) const;

  // Throws ContractError unless 1 <= k <= K.
  void check_step(int k) const;

 private:
  ScheduleParams params_;
  std::vector<double> beta_;
  std::vector<double> alpha_hat_;
  std::vector<double> alpha_cumprod_;  // K + 1 entries
  std::vector<double> sigma2_;
};

}  // namespace mdiff::diffusion

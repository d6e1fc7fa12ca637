#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::metrics {

// N predictions of an L x D future, optionally with the ground truth.
struct SampleSet {
  num::DenseArray samples;                     // [N, L, D]
  std::optional<num::DenseArray> ground_truth;  // [L, D]
  double fps = 25.0;

  std::size_t count() const { return samples.extent(0); }
  std::size_t frames() const { return samples.extent(1); }
  std::size_t pose_dim() const { return samples.extent(2); }
  // Throws DimensionError on inconsistent shapes or N = 0.
  void validate() const;
};

struct DisplacementStats {
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
};

struct MetricsReport {
  double apd = 0.0;
  double mde = 0.0, ade = 0.0, sde = 0.0;
  double mfde = 0.0, afde = 0.0, sfde = 0.0;
};

// Mean over ordered pairs i != j of the flattened L*D distance. UndefinedMetricError for N < 2.
double apd(const SampleSet& s);

// d_i = ||x_i - x||_2 / L over the flattened L*D difference. ContractError without ground truth.
DisplacementStats displacement_errors(const SampleSet& s);

// Same on the final frame only, without the 1/L factor.
DisplacementStats final_displacement_errors(const SampleSet& s);

// All seven; needs N >= 2 and ground truth.
MetricsReport evaluate(const SampleSet& s);

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

// For each horizon, frame = round(ms * fps / 1000) (1-based); horizons outside
// 1..L are left out. Value: mean over D of the squared wrapped difference at that frame.
std::map<int, double> euler_mse(const num::DenseArray& pred, const num::DenseArray& gt, double fps,
                                std::span<const int> horizons_ms);

inline constexpr int kDefaultHorizonsMs[] = {80, 160, 320, 400, 560, 1000};

}  // namespace mdiff::metrics

#include "mdiff/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mdiff/errors.hpp"

namespace mdiff::metrics {
namespace {

double distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

DisplacementStats summarize(const std::vector<double>& d) {
  DisplacementStats out;
  out.min = *std::min_element(d.begin(), d.end());
  double sum = 0.0;
  for (double v : d) sum += v;
  out.mean = sum / static_cast<double>(d.size());
  double sq = 0.0;
  for (double v : d) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(d.size()));
  return out;
}

const num::DenseArray& require_gt(const SampleSet& s) {
  s.validate();
  if (!s.ground_truth) throw ContractError("displacement metrics need ground truth");
  return *s.ground_truth;
}

}  // namespace

void SampleSet::validate() const {
  if (samples.rank() != 3 || samples.extent(0) == 0 || samples.extent(1) == 0 || samples.extent(2) == 0) {
    throw DimensionError("sample set must be a non-empty [N, L, D] array, got " + num::shape_string(samples.shape()));
  }
  if (ground_truth && ground_truth->shape() != num::Shape{frames(), pose_dim()}) {
    throw DimensionError("ground truth shape " + num::shape_string(ground_truth->shape()) + " does not match samples " +
                         num::shape_string(samples.shape()));
  }
}

double apd(const SampleSet& s) {
  s.validate();
  const std::size_t n = s.count();
  if (n < 2) throw UndefinedMetricError("APD needs at least two samples, got " + std::to_string(n));
  const std::size_t block = s.frames() * s.pose_dim();
  const double* x = s.samples.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total += 2.0 * distance(x + i * block, x + j * block, block);
  }
  return total / static_cast<double>(n * (n - 1));
}

DisplacementStats displacement_errors(const SampleSet& s) {
  const num::DenseArray& gt = require_gt(s);
  const std::size_t block = s.frames() * s.pose_dim();
  std::vector<double> d(s.count());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = distance(s.samples.data() + i * block, gt.data(), block) / static_cast<double>(s.frames());
  }
  return summarize(d);
}

DisplacementStats final_displacement_errors(const SampleSet& s) {
  const num::DenseArray& gt = require_gt(s);
  const std::size_t dim = s.pose_dim();
  const std::size_t block = s.frames() * dim;
  const std::size_t last = (s.frames() - 1) * dim;
  std::vector<double> d(s.count());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = distance(s.samples.data() + i * block + last, gt.data() + last, dim);
  return summarize(d);
}

MetricsReport evaluate(const SampleSet& s) {
  MetricsReport r;
  r.apd = apd(s);
  const DisplacementStats de = displacement_errors(s);
  const DisplacementStats fde = final_displacement_errors(s);
  r.mde = de.min;
  r.ade = de.mean;
  r.sde = de.std;
  r.mfde = fde.min;
  r.afde = fde.mean;
  r.sfde = fde.std;
  return r;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  return a - 2.0 * pi * std::ceil((a - pi) / (2.0 * pi));
}

std::map<int, double> euler_mse(const num::DenseArray& pred, const num::DenseArray& gt, double fps,
                                std::span<const int> horizons_ms) {
  if (pred.rank() != 2 || pred.shape() != gt.shape()) {
    throw DimensionError("euler_mse: prediction " + num::shape_string(pred.shape()) + " vs ground truth " +
                         num::shape_string(gt.shape()));
  }
  if (!(fps > 0.0)) throw ConfigError("euler_mse needs a positive frame rate");
  const std::size_t l = pred.extent(0), d = pred.extent(1);
  std::map<int, double> out;
  for (int ms : horizons_ms) {
    const long frame = std::lround(static_cast<double>(ms) * fps / 1000.0);
    if (frame < 1 || static_cast<std::size_t>(frame) > l) continue;
    const std::size_t r = static_cast<std::size_t>(frame - 1);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = wrap_angle(wrap_angle(pred.at(r, j)) - wrap_angle(gt.at(r, j)));
      sq += diff * diff;
    }
    out[ms] = sq / static_cast<double>(d);
  }
  return out;
}

}  // namespace mdiff::metrics

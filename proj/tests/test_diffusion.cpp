#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mdiff/diffusion/loss.hpp"
#include "mdiff/diffusion/process.hpp"
#include "mdiff/diffusion/sampler.hpp"
#include "mdiff/diffusion/schedule.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/numerics/ops.hpp"
#include "mdiff/numerics/random.hpp"

using namespace mdiff;
using namespace mdiff::diffusion;
using num::DenseArray;

namespace {

// Returns a preset noise estimate per item, in batch order.
class FixedPredictor final : public NoisePredictor {
 public:
  explicit FixedPredictor(std::vector<DenseArray> outputs) : outputs_(std::move(outputs)) {}
  num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const override {
    std::vector<double> flat;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const DenseArray& o = outputs_.at(i);
      flat.insert(flat.end(), o.values().begin(), o.values().end());
    }
    const auto& s = batch.p_k.front().shape();
    return tape.constant(DenseArray({batch.size(), s[0], s[1]}, std::move(flat)));
  }

 private:
  std::vector<DenseArray> outputs_;
};

class ZeroPredictor final : public NoisePredictor {
 public:
  num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const override {
    const auto& s = batch.p_k.front().shape();
    return tape.constant(DenseArray({batch.size(), s[0], s[1]}, 0.0));
  }
};

// eps_hat = 0.3 * p_k + 0.1 * k + mean(p_obs); a cheap model that reads every input.
class AffinePredictor final : public NoisePredictor {
 public:
  num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const override {
    const auto& s = batch.p_k.front().shape();
    std::vector<double> flat;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      double m = 0.0;
      for (double v : batch.p_obs[i].values()) m += v;
      m /= static_cast<double>(batch.p_obs[i].size());
      for (double v : batch.p_k[i].values()) flat.push_back(0.3 * v + 0.1 * batch.steps[i] + m);
    }
    return tape.constant(DenseArray({batch.size(), s[0], s[1]}, std::move(flat)));
  }
};

class InfPredictor final : public NoisePredictor {
 public:
  num::Var predict(num::Tape& tape, const DenoiseBatch& batch) const override {
    const auto& s = batch.p_k.front().shape();
    return tape.constant(DenseArray({batch.size(), s[0], s[1]}, std::numeric_limits<double>::infinity()));
  }
};

NoiseSchedule paper_schedule() { return NoiseSchedule::linear(20, 0.001, 0.333); }

// Standard DDPM posterior mean of x^{k-1} given x^k and x0, written from the
// Gaussian conditioning formula rather than from the noise parameterization.
DenseArray posterior_mean(const DenseArray& x0, const DenseArray& xk, int k, const NoiseSchedule& s) {
  const double a_prev = s.alpha_cumprod(k - 1);
  const double a_k = s.alpha_cumprod(k);
  const double b = s.beta(k);
  const double c0 = std::sqrt(a_prev) * b / (1.0 - a_k);
  const double ck = std::sqrt(1.0 - b) * (1.0 - a_prev) / (1.0 - a_k);
  DenseArray out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * x0[i] + ck * xk[i];
  return out;
}

}  // namespace

TEST_CASE("linear schedule endpoints and derived tables") {
  const NoiseSchedule s = paper_schedule();
  CHECK(s.steps() == 20);
  CHECK(s.beta(1) == 0.001);
  CHECK(s.beta(20) == 0.333);
  CHECK(s.beta(10) == doctest::Approx(0.001 + 9.0 * (0.332 / 19.0)).epsilon(1e-14));
  CHECK(s.beta(10) == doctest::Approx(0.158263).epsilon(1e-6));
  CHECK(s.alpha_cumprod(0) == 1.0);
  CHECK(s.alpha_cumprod(1) == doctest::Approx(0.999).epsilon(1e-15));
  CHECK(s.alpha_cumprod(2) == doctest::Approx(0.999 * (1.0 - (0.001 + 0.332 / 19.0))).epsilon(1e-15));
  CHECK(s.alpha_cumprod(2) == doctest::Approx(0.980545).epsilon(1e-6));
}

TEST_CASE("schedule identities") {
  const NoiseSchedule s = paper_schedule();
  CHECK(s.sigma2(1) == 0.0);
  double prod = 1.0;
  for (int k = 1; k <= s.steps(); ++k) {
    CHECK(s.alpha_hat(k) == 1.0 - s.beta(k));
    prod *= s.alpha_hat(k);
    CHECK(s.alpha_cumprod(k) == doctest::Approx(prod).epsilon(1e-15));
    CHECK(s.alpha_cumprod(k) < s.alpha_cumprod(k - 1));
    CHECK(s.alpha_cumprod(k) > 0.0);
    if (k > 1) {
      CHECK(s.beta(k) > s.beta(k - 1));
      CHECK(s.sigma2(k) < s.beta(k));
      CHECK(s.sigma2(k) > 0.0);
    }
  }
  const NoiseSchedule one = NoiseSchedule::linear(1, 0.01, 0.2);
  CHECK(one.beta(1) == 0.01);
  CHECK(one.sigma2(1) == 0.0);

  CHECK_THROWS_AS(NoiseSchedule::linear(0, 0.001, 0.333), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::linear(20, 0.0, 0.333), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::linear(20, 0.4, 0.3), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule::linear(20, 0.001, 1.0), ConfigError);
  CHECK_THROWS_AS(s.beta(0), ContractError);
  CHECK_THROWS_AS(s.beta(21), ContractError);
}

TEST_CASE("forward noise limits and range") {
  const NoiseSchedule s = paper_schedule();
  num::Rng rng(3);
  const DenseArray x0 = rng.normal_array({5, 6});
  const DenseArray eps = rng.normal_array({5, 6});
  const DenseArray zero({5, 6}, 0.0);
  for (int k : {1, 7, 20}) {
    const DenseArray a = forward_noise(x0, k, zero, s);
    const DenseArray b = forward_noise(zero, k, eps, s);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      CHECK(a[i] == std::sqrt(s.alpha_cumprod(k)) * x0[i]);
      CHECK(b[i] == std::sqrt(1.0 - s.alpha_cumprod(k)) * eps[i]);
    }
  }
  CHECK_THROWS_AS(forward_noise(x0, 0, eps, s), ContractError);
  CHECK_THROWS_AS(forward_noise(x0, 21, eps, s), ContractError);
  CHECK_THROWS_AS(forward_noise(x0, 3, DenseArray({5, 5}, 0.0), s), ContractError);
}

TEST_CASE("forward noise moments over seeded draws") {
  const NoiseSchedule s = paper_schedule();
  const int k = 9;
  const double x = 0.7;
  const DenseArray x0({1, 1}, x);
  num::Rng rng(11);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) {
    draws[i] = forward_noise(x0, k, DenseArray({1, 1}, rng.normal()), s)[0];
    sum += draws[i];
  }
  const double mean = sum / n;
  for (double d : draws) sq += (d - mean) * (d - mean);
  const double var = sq / (n - 1);
  const double want_mean = std::sqrt(s.alpha_cumprod(k)) * x;
  const double want_var = 1.0 - s.alpha_cumprod(k);
  CHECK(std::abs(mean - want_mean) < 3.0 * std::sqrt(want_var / n));
  // Var of the sample variance of a Gaussian is 2 sigma^4 / (n - 1).
  CHECK(std::abs(var - want_var) < 3.0 * want_var * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("mu_theta zero noise, posterior mean and linearity") {
  const NoiseSchedule s = paper_schedule();
  num::Rng rng(5);
  const DenseArray xk = rng.normal_array({4, 3});
  const DenseArray zero({4, 3}, 0.0);
  const DenseArray m0 = mu_theta(xk, 6, zero, s);
  for (std::size_t i = 0; i < xk.size(); ++i) CHECK(m0[i] == doctest::Approx(xk[i] / std::sqrt(1.0 - s.beta(6))).epsilon(1e-15));

  for (int trial = 0; trial < 20; ++trial) {
    const DenseArray x0 = rng.normal_array({4, 3});
    const DenseArray eps = rng.normal_array({4, 3});
    for (int k = 1; k <= s.steps(); ++k) {
      const DenseArray x_k = forward_noise(x0, k, eps, s);
      const DenseArray mu = mu_theta(x_k, k, eps, s);
      CHECK(num::max_abs_diff(mu, posterior_mean(x0, x_k, k, s)) < 1e-10);
      // One oracle reverse step with z = 0 lands on the posterior mean too.
      CHECK(num::max_abs_diff(reverse_step(x_k, k, eps, zero, s), posterior_mean(x0, x_k, k, s)) < 1e-10);
    }
  }

  const DenseArray eh = rng.normal_array({4, 3});
  const double a = -2.5;
  const DenseArray lhs = mu_theta(a * xk, 4, a * eh, s);
  const DenseArray rhs = a * mu_theta(xk, 4, eh, s);
  CHECK(num::max_abs_diff(lhs, rhs) < 1e-12);
  CHECK_THROWS_AS(mu_theta(xk, 0, eh, s), ContractError);
  CHECK_THROWS_AS(mu_theta(xk, 2, DenseArray({3, 4}, 0.0), s), ContractError);
}

TEST_CASE("reverse step noise handling") {
  const NoiseSchedule s = paper_schedule();
  num::Rng rng(8);
  const DenseArray xk = rng.normal_array({3, 3});
  const DenseArray eh = rng.normal_array({3, 3});
  const DenseArray zero({3, 3}, 0.0);
  CHECK(reverse_step(xk, 5, eh, zero, s) == mu_theta(xk, 5, eh, s));
  const DenseArray z1 = rng.normal_array({3, 3});
  const DenseArray big({3, 3}, 1e6);
  CHECK(reverse_step(xk, 1, eh, z1, s) == reverse_step(xk, 1, eh, big, s));
  CHECK(reverse_step(xk, 1, eh, DenseArray({3, 3}, std::nan("")), s) == mu_theta(xk, 1, eh, s));
  CHECK_THROWS_AS(reverse_step(xk, 5, eh, DenseArray({2, 3}, 0.0), s), ContractError);

  const int k = 12;
  const DenseArray x1({1, 1}, 0.4);
  const DenseArray e1({1, 1}, -0.2);
  const double mu = mu_theta(x1, k, e1, s)[0];
  const int n = 100000;
  double sq = 0.0, sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = reverse_step(x1, k, e1, DenseArray({1, 1}, rng.normal()), s)[0];
    sum += v;
    sq += (v - mu) * (v - mu);
  }
  const double var = sq / n;
  CHECK(std::abs(sum / n - mu) < 3.0 * std::sqrt(s.sigma2(k) / n));
  CHECK(std::abs(var - s.sigma2(k)) < 3.0 * s.sigma2(k) * std::sqrt(2.0 / n));
}

TEST_CASE("loss oracle, zero model and batch order") {
  const NoiseSchedule s = paper_schedule();
  num::Rng rng(21);
  std::vector<motion::PredictionTask> tasks;
  std::vector<int> steps;
  std::vector<DenseArray> eps;
  for (int i = 0; i < 4; ++i) {
    tasks.push_back({rng.normal_array({3, 6}), rng.normal_array({5, 6})});
    steps.push_back(1 + static_cast<int>(rng.uniform_index(20)));
    eps.push_back(rng.normal_array({5, 6}));
  }

  {
    num::Tape tape(false);
    const FixedPredictor oracle(eps);
    CHECK(tape.value(diffusion_loss(tape, oracle, tasks, steps, eps, s)).item() == 0.0);
  }

  num::Tape tape(false);
  const FixedPredictor wrong([&] {
    std::vector<DenseArray> w;
    for (int i = 0; i < 4; ++i) w.push_back(rng.normal_array({5, 6}));
    return w;
  }());
  const double base = tape.value(diffusion_loss(tape, wrong, tasks, steps, eps, s)).item();
  // Reverse both the items and the predictor's outputs together.
  std::vector<motion::PredictionTask> rt(tasks.rbegin(), tasks.rend());
  std::vector<int> rs(steps.rbegin(), steps.rend());
  std::vector<DenseArray> re(eps.rbegin(), eps.rend());
  std::vector<DenseArray> wo;
  {
    num::Tape t2(false);
    DenoiseBatch probe;
    for (int i = 0; i < 4; ++i) {
      probe.p_k.push_back(DenseArray({5, 6}, 0.0));
      probe.steps.push_back(1);
    }
    const DenseArray all = t2.value(wrong.predict(t2, probe));
    for (int i = 3; i >= 0; --i) {
      wo.push_back(DenseArray({5, 6}, std::vector<double>(all.values().begin() + i * 30, all.values().begin() + (i + 1) * 30)));
    }
  }
  const FixedPredictor wrong_rev(wo);
  num::Tape t3(false);
  CHECK(t3.value(diffusion_loss(t3, wrong_rev, rt, rs, re, s)).item() == doctest::Approx(base).epsilon(1e-14));

  // Zero model: loss = mean(eps^2), expectation 1.
  const ZeroPredictor zero;
  double acc = 0.0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    num::Tape tz(false);
    const DenseArray e = rng.normal_array({5, 6});
    const double l = tz.value(diffusion_loss(tz, zero, tasks[0], 1 + t % 20, e, s)).item();
    double direct = 0.0;
    for (double v : e.values()) direct += v * v;
    CHECK(l == doctest::Approx(direct / 30.0).epsilon(1e-14));
    acc += l;
  }
  // Each draw is chi^2_30 / 30 with variance 2/30.
  CHECK(std::abs(acc / trials - 1.0) < 3.0 * std::sqrt(2.0 / 30.0 / trials));

  motion::PredictionTask no_gt{rng.normal_array({3, 6}), std::nullopt};
  num::Tape te(false);
  CHECK_THROWS_AS(diffusion_loss(te, zero, no_gt, 3, eps[0], s), ContractError);
}

TEST_CASE("stochastic sampler determinism, independence of N and call count") {
  const NoiseSchedule s = NoiseSchedule::linear(5, 0.001, 0.333);
  num::Rng rng(2);
  const DenseArray p_obs = rng.normal_array({4, 6});
  const AffinePredictor model;

  const DenseArray a = sample_stochastic(model, p_obs, 5, 6, 42, s);
  const DenseArray b = sample_stochastic(model, p_obs, 5, 6, 42, s);
  CHECK(a.shape() == num::Shape{6, 5, 6});
  CHECK(a == b);
  const DenseArray c = sample_stochastic(model, p_obs, 5, 6, 43, s);
  CHECK_FALSE(a == c);

  const DenseArray one = sample_stochastic(model, p_obs, 5, 1, 42, s);
  CHECK(std::equal(one.values().begin(), one.values().end(), a.values().begin()));
  // Samples differ from each other.
  CHECK_FALSE(std::equal(a.values().begin(), a.values().begin() + 30, a.values().begin() + 30));

  const CountingPredictor counter(model);
  sample_stochastic(counter, p_obs, 5, 7, 1, s);
  CHECK(counter.evaluations() == 7u * 5u);
  CHECK(counter.calls() == 5u);

  const NoiseSchedule k1 = NoiseSchedule::linear(1, 0.01, 0.01);
  const CountingPredictor c1(model);
  sample_stochastic(c1, p_obs, 5, 3, 9, k1);
  CHECK(c1.evaluations() == 3u);
  CHECK(c1.calls() == 1u);

  CHECK_THROWS_AS(sample_stochastic(model, p_obs, 5, 0, 1, s), ContractError);
}

TEST_CASE("stochastic chains follow the reverse recursion from their own stream") {
  const NoiseSchedule s = NoiseSchedule::linear(4, 0.01, 0.2);
  num::Rng rng(6);
  const DenseArray p_obs = rng.normal_array({3, 3});
  const AffinePredictor model;
  const DenseArray got = sample_stochastic(model, p_obs, 2, 3, 77, s);

  for (std::size_t i = 0; i < 3; ++i) {
    num::Rng stream(num::derive_seed(77, i));
    DenseArray x = stream.normal_array({2, 3});
    for (int k = s.steps(); k >= 1; --k) {
      DenoiseBatch one{{p_obs}, {x}, {k}};
      num::Tape tape(false);
      const DenseArray eh = tape.value(model.predict(tape, one)).reshaped({2, 3});
      const DenseArray z = k > 1 ? stream.normal_array({2, 3}) : DenseArray({2, 3}, 0.0);
      x = reverse_step(x, k, eh, z, s);
    }
    CHECK(std::equal(x.values().begin(), x.values().end(), got.values().begin() + static_cast<std::ptrdiff_t>(i * 6)));
  }
}

TEST_CASE("deterministic sampler") {
  const NoiseSchedule s = paper_schedule();
  num::Rng rng(4);
  const DenseArray p_obs = rng.normal_array({4, 6});
  const AffinePredictor model;
  const DenseArray a = sample_deterministic(model, p_obs, 5, s);
  const DenseArray b = sample_deterministic(model, p_obs, 5, s);
  CHECK(a.shape() == num::Shape{5, 6});
  CHECK(a == b);

  ZeroNoise zero;
  NoiseSource* sources[] = {&zero};
  const DenseArray via_core = run_reverse_chains(model, p_obs, 5, sources, s);
  CHECK(via_core.reshaped({5, 6}) == a);

  const CountingPredictor counter(model);
  sample_deterministic(counter, p_obs, 5, s);
  CHECK(counter.evaluations() == 20u);

  // With the zero model and zero noise every step just rescales 0.
  const ZeroPredictor zp;
  CHECK(sample_deterministic(zp, p_obs, 5, s) == DenseArray({5, 6}, 0.0));
}

TEST_CASE("sampler reports divergence with the step") {
  const NoiseSchedule s = paper_schedule();
  const InfPredictor model;
  const DenseArray p_obs({2, 3}, 0.0);
  try {
    sample_stochastic(model, p_obs, 2, 2, 1, s);
    FAIL("expected divergence");
  } catch (const DivergedSamplingError& e) {
    CHECK(e.step() == 20);
  }
}

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Each criterion must also finish inside its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metric_oracles.hpp"
#include "mdiff/diffusion/loss.hpp"
#include "mdiff/diffusion/process.hpp"
#include "mdiff/diffusion/sampler.hpp"
#include "mdiff/metrics/metrics.hpp"
#include "mdiff/motion/synth.hpp"
#include "mdiff/motion/windowing.hpp"
#include "mdiff/training/checkpoint.hpp"
#include "mdiff/training/gradcheck_suite.hpp"
#include "mdiff/training/trainer.hpp"

using namespace mdiff;
using num::DenseArray;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = o.pass && secs < budget_s;
  if (!pass) ++failures;
  std::printf("%s  %s: %s [%.2f s of %.0f s]\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

void note(const std::string& text) {
  std::printf("      %s\n", text.c_str());
  std::fflush(stdout);
}

// DDPM posterior mean of x^{k-1} given x^k and x^0, from its own coefficients.
DenseArray posterior_mean(const DenseArray& x0, const DenseArray& xk, int k, const diffusion::NoiseSchedule& s) {
  const double a_k = s.alpha_cumprod(k), a_prev = s.alpha_cumprod(k - 1), b = s.beta(k);
  const double c0 = std::sqrt(a_prev) * b / (1.0 - a_k);
  const double ck = std::sqrt(1.0 - b) * (1.0 - a_prev) / (1.0 - a_k);
  DenseArray out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c0 * x0[i] + ck * xk[i];
  return out;
}

// Returns the exact noise that maps x0 to the current state, and records the
// states it is shown.
class ExactEpsPredictor final : public diffusion::NoisePredictor {
 public:
  ExactEpsPredictor(DenseArray x0, const diffusion::NoiseSchedule& s) : x0_(std::move(x0)), s_(s) {}

  num::Var predict(num::Tape& tape, const diffusion::DenoiseBatch& batch) const override {
    std::vector<double> out;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const int k = batch.steps[i];
      const double a = s_.alpha_cumprod(k);
      seen_.push_back({k, batch.p_k[i]});
      for (std::size_t j = 0; j < x0_.size(); ++j) {
        out.push_back((batch.p_k[i][j] - std::sqrt(a) * x0_[j]) / std::sqrt(1.0 - a));
      }
    }
    const auto& shape = x0_.shape();
    return tape.constant(DenseArray({batch.size(), shape[0], shape[1]}, std::move(out)));
  }

  mutable std::vector<std::pair<int, DenseArray>> seen_;

 private:
  DenseArray x0_;
  const diffusion::NoiseSchedule& s_;
};

// Initial state from a given array, zeros afterwards.
class FixedStart final : public diffusion::NoiseSource {
 public:
  explicit FixedStart(DenseArray start) : start_(std::move(start)) {}
  DenseArray draw(const num::Shape& shape) override {
    if (first_) {
      first_ = false;
      return start_;
    }
    return DenseArray(shape, 0.0);
  }

 private:
  DenseArray start_;
  bool first_ = true;
};

oracle::Frames frames_of(const DenseArray& a, std::size_t offset, std::size_t l, std::size_t d) {
  oracle::Frames f(l, std::vector<double>(d));
  for (std::size_t t = 0; t < l; ++t)
    for (std::size_t j = 0; j < d; ++j) f[t][j] = a[offset + t * d + j];
  return f;
}

// Toy-sized dataset and trained series model shared by the overfit and dual-mode criteria.
struct Overfit {
  std::vector<motion::PredictionTask> tasks;  // normalized
  motion::Normalizer normalizer;
  std::optional<training::Checkpoint> checkpoint;
};
Overfit overfit;

}  // namespace

int main() {
  criterion("schedule exactness", 1.0, [] {
    const auto s = diffusion::NoiseSchedule::linear(20, 0.001, 0.333);
    bool decreasing = true;
    for (int k = 1; k <= 20; ++k) decreasing = decreasing && s.alpha_cumprod(k) < s.alpha_cumprod(k - 1);
    const bool ok = s.beta(1) == 0.001 && s.beta(20) == 0.333 && decreasing && s.sigma2(1) == 0.0;
    return Outcome{ok, fmt("beta_1 = %.17g, beta_20 = %.17g, sigma2(1) = %g", s.beta(1), s.beta(20), s.sigma2(1)) +
                           (decreasing ? ", alpha strictly decreasing" : ", alpha NOT strictly decreasing")};
  });

  criterion("sampler algebra", 5.0, [] {
    const auto s = diffusion::NoiseSchedule::linear(20, 0.001, 0.333);
    num::Rng rng(2024);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const DenseArray x0 = rng.normal_array({5, 6});
      // One step from an arbitrary state at every k.
      for (int k = 1; k <= 20; ++k) {
        const DenseArray xk = rng.normal_array({5, 6});
        const double a = s.alpha_cumprod(k);
        DenseArray eps(xk.shape());
        for (std::size_t j = 0; j < eps.size(); ++j) eps[j] = (xk[j] - std::sqrt(a) * x0[j]) / std::sqrt(1.0 - a);
        const DenseArray step = diffusion::reverse_step(xk, k, eps, DenseArray(xk.shape(), 0.0), s);
        worst = std::max(worst, num::max_abs_diff(step, posterior_mean(x0, xk, k, s)));
        ++checked;
      }
      // A whole zero-noise chain through the sampler: every state it visits is
      // the posterior mean of the one before.
      ExactEpsPredictor oracle_model(x0, s);
      FixedStart start(rng.normal_array({5, 6}));
      diffusion::NoiseSource* sources[] = {&start};
      const DenseArray final_state = diffusion::run_reverse_chains(oracle_model, rng.normal_array({3, 6}), 5, sources, s);
      const auto& seen = oracle_model.seen_;
      for (std::size_t i = 0; i < seen.size(); ++i) {
        const auto& [k, xk] = seen[i];
        const DenseArray next = i + 1 < seen.size() ? seen[i + 1].second : final_state.reshaped({5, 6});
        worst = std::max(worst, num::max_abs_diff(next, posterior_mean(x0, xk, k, s)));
        ++checked;
      }
    }
    return Outcome{worst < 1e-10, fmt("%.0f steps (100 random states, k = 1..20, single steps and full chains), "
                                      "max |step - posterior mean| = %.3e",
                                      static_cast<double>(checked), worst)};
  });

  criterion("gradient integrity", 60.0, [] {
    bool ok = true;
    std::string detail;
    for (auto v : {denoiser::Variant::series, denoiser::Variant::parallel}) {
      const auto r = training::check_end_to_end(v, 8, 0);
      ok = ok && r.passed && r.probes == 8 && r.worst_rel_error < 1e-4;
      detail += std::string(denoiser::to_string(v)) +
                fmt(" worst rel err %.3e over %.0f probes (%.0f redrawn at a kink); ", r.worst_rel_error,
                    static_cast<double>(r.probes), static_cast<double>(r.rejected));
    }
    return Outcome{ok, detail + "tolerance 1e-4"};
  });

  criterion("overfit convergence", 300.0, [] {
    motion::SynthConfig sc;
    sc.n_joints = 2;
    sc.n_sequences = 8;
    sc.frames_per_sequence = 40;
    sc.seed = 1;
    std::vector<motion::PredictionTask> raw;
    for (const auto& seq : motion::synth_dataset(sc)) raw.push_back(motion::window_split(seq, 4, 5, 10).front());
    overfit.normalizer = motion::Normalizer::fit(raw);
    for (const auto& t : raw) overfit.tasks.push_back(overfit.normalizer.apply(t));

    const auto cfg = training::toy_config(denoiser::Variant::series);
    const diffusion::ScheduleParams sp{5, 0.001, 0.333};
    training::TrainConfig tc;
    tc.batch_size = 16;
    tc.iterations = 2000;
    tc.adam.lr = 3e-3;
    tc.seed = 0;
    training::Trainer trainer(raw, cfg, sp, overfit.normalizer, tc);
    trainer.run();
    overfit.checkpoint = trainer.checkpoint();

    const auto& losses = trainer.losses();
    double final_loss = 0.0;
    for (std::size_t i = losses.size() - 100; i < losses.size(); ++i) final_loss += losses[i] / 100.0;

    const auto& sched = trainer.schedule();
    const auto& model = trainer.model();
    std::vector<double> ade;
    for (const auto& t : overfit.tasks) {
      metrics::SampleSet set{diffusion::sample_deterministic(model, t.p_obs, 5, sched).reshaped({1, 5, 6}), t.p_gt, 25.0};
      ade.push_back(metrics::displacement_errors(set).mean);
    }
    double mean_ade = 0.0, max_ade = 0.0;
    for (double a : ade) {
      mean_ade += a / static_cast<double>(ade.size());
      max_ade = std::max(max_ade, a);
    }

    // Where the remaining loss sits: per-step loss over the training tasks.
    num::Rng er(123);
    std::string per_k = "loss by diffusion step:";
    for (int k = 1; k <= sp.steps; ++k) {
      double acc = 0.0;
      for (int rep = 0; rep < 16; ++rep) {
        for (const auto& t : overfit.tasks) {
          num::Tape tape(false);
          acc += tape.value(diffusion::diffusion_loss(tape, model, t, k, er.normal_array({5, 6}), sched)).item();
        }
      }
      per_k += fmt(" k=%.0f %.4f", k, acc / (16.0 * static_cast<double>(overfit.tasks.size())));
    }
    note(per_k);
    std::size_t rises = 0;
    std::string windows = "100-iteration window means:";
    for (std::size_t w = 0; w + 100 <= losses.size(); w += 100) {
      double m = 0.0, prev = 0.0;
      for (std::size_t i = w; i < w + 100; ++i) m += losses[i] / 100.0;
      if (w > 0) {
        for (std::size_t i = w - 100; i < w; ++i) prev += losses[i] / 100.0;
        if (m > prev) ++rises;
      }
      windows += fmt(" %.3f", m);
    }
    note(windows);
    note(fmt("window means rise %.0f time(s) out of 19", static_cast<double>(rises)));
    note(fmt("deterministic aDE over all 8 training tasks: mean %.4f, max %.4f", mean_ade, max_ade));

    const bool ok = final_loss < 0.05 && ade[0] < 0.1;
    return Outcome{ok, fmt("final loss (mean of last 100 iterations) %.4f, target < 0.05; "
                           "deterministic aDE on training task 0 %.4f, target < 0.1",
                           final_loss, ade[0])};
  });

  criterion("dual-mode contract", 120.0, [] {
    if (!overfit.checkpoint) return Outcome{false, "no trained checkpoint"};
    // Round-trip through the on-disk encoding, as a separate sampling run would.
    const auto ck = training::decode_checkpoint(training::encode_checkpoint(*overfit.checkpoint));
    const auto model_a = training::model_from(*overfit.checkpoint);
    const auto model_b = training::model_from(ck);
    const auto sched = diffusion::NoiseSchedule::linear(ck.schedule);
    bool stable = true, apd_positive = true, seed_exact = true, seed_matters = true;
    double min_apd = 1e300;
    for (std::size_t i = 0; i < overfit.tasks.size(); ++i) {
      const auto& obs = overfit.tasks[i].p_obs;
      const DenseArray d1 = diffusion::sample_deterministic(model_a, obs, 5, sched);
      const DenseArray d2 = diffusion::sample_deterministic(model_b, obs, 5, sched);
      stable = stable && d1 == d2;

      const DenseArray s1 = diffusion::sample_stochastic(model_a, obs, 5, 50, 100 + i, sched);
      const DenseArray s2 = diffusion::sample_stochastic(model_b, obs, 5, 50, 100 + i, sched);
      const DenseArray s3 = diffusion::sample_stochastic(model_a, obs, 5, 50, 200 + i, sched);
      seed_exact = seed_exact && s1 == s2;
      seed_matters = seed_matters && !(s1 == s3);
      const double a = metrics::apd(metrics::SampleSet{s1, std::nullopt, 25.0});
      min_apd = std::min(min_apd, a);
      apd_positive = apd_positive && a > 0.0;
    }
    const bool ok = stable && apd_positive && seed_exact && seed_matters;
    return Outcome{ok, std::string(stable ? "deterministic bit-stable" : "deterministic NOT bit-stable") +
                           (seed_exact ? ", N=50 seed-exact" : ", N=50 NOT seed-exact") +
                           (seed_matters ? "" : ", seed has no effect") + fmt(", min APD %.4f over 8 tasks", min_apd)};
  });

  criterion("metric fidelity", 30.0, [] {
    num::Rng rng(77);
    double worst = 0.0;
    bool ordering = true;
    std::size_t euler_checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(9), l = 1 + rng.uniform_index(30), d = 3 * (1 + rng.uniform_index(4));
      const double fps = trial % 2 == 0 ? 25.0 : 50.0;
      const double scale = 0.2 + 4.0 * rng.uniform();
      metrics::SampleSet set{scale * rng.normal_array({n, l, d}), scale * rng.normal_array({l, d}), fps};

      oracle::Set xs;
      for (std::size_t i = 0; i < n; ++i) xs.push_back(frames_of(set.samples, i * l * d, l, d));
      const oracle::Frames gt = frames_of(*set.ground_truth, 0, l, d);
      const auto de = oracle::de(xs, gt), fde = oracle::fde(xs, gt);

      const auto r = metrics::evaluate(set);
      for (auto [got, want] : {std::pair{r.apd, oracle::apd(xs)}, {r.mde, de.min}, {r.ade, de.mean}, {r.sde, de.std},
                               {r.mfde, fde.min}, {r.afde, fde.mean}, {r.sfde, fde.std}}) {
        worst = std::max(worst, std::abs(got - want));
      }
      ordering = ordering && r.mde <= r.ade && r.mfde <= r.afde;

      const auto first = set.samples.values().begin();
      const DenseArray pred(num::Shape{l, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(l * d)));
      const auto mse = metrics::euler_mse(pred, *set.ground_truth, fps, metrics::kDefaultHorizonsMs);
      for (int ms : metrics::kDefaultHorizonsMs) {
        const long frame = std::lround(ms * fps / 1000.0);
        const bool inside = frame >= 1 && frame <= static_cast<long>(l);
        if (inside != (mse.count(ms) == 1)) {
          worst = 1e300;
          continue;
        }
        if (!inside) continue;
        worst = std::max(worst, std::abs(mse.at(ms) - oracle::euler_mse_at(xs[0], gt, static_cast<std::size_t>(frame))));
        ++euler_checked;
      }
    }
    return Outcome{worst < 1e-9 && ordering,
                   fmt("100 random sample sets, %.0f euler horizons, max |metric - oracle| = %.3e", euler_checked, worst) +
                       (ordering ? ", mDE <= aDE and mFDE <= aFDE throughout" : ", ordering VIOLATED")};
  });

  criterion("cost contract", 10.0, [] {
    auto cfg = training::toy_config(denoiser::Variant::series);
    cfg.n_steps = 20;
    const denoiser::DenoiserModel model(cfg, 5, false);
    const auto sched = diffusion::NoiseSchedule::linear(20, 0.001, 0.333);
    num::Rng rng(9);
    const DenseArray obs = rng.normal_array({cfg.obs_frames, cfg.pose_dim});
    bool ok = true;
    std::string detail;
    for (std::size_t n : {1, 7, 50}) {
      diffusion::CountingPredictor counter(model);
      diffusion::sample_stochastic(counter, obs, cfg.future_frames, n, 3, sched);
      ok = ok && counter.evaluations() == n * 20 && counter.calls() == 20;
      detail += fmt("N=%.0f: %.0f evaluations in %.0f calls; ", static_cast<double>(n),
                    static_cast<double>(counter.evaluations()), static_cast<double>(counter.calls()));
    }
    return Outcome{ok, detail + "expected N*K evaluations with K = 20"};
  });

  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ALL PASSED" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}

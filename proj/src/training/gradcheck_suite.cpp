#include "mdiff/training/gradcheck_suite.hpp"

#include <functional>

#include "mdiff/denoiser/model.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/diffusion/loss.hpp"
#include "mdiff/numerics/ops.hpp"

namespace mdiff::training {

using num::DenseArray;
using num::Tape;
using num::TapeFn;
using num::Var;

namespace {

// Sign of every ReLU input on the tape, in recording order.
void relu_pattern(const Tape& tape, std::vector<bool>& out) {
  out.clear();
  for (std::size_t id = 0; id < tape.size(); ++id) {
    if (tape.op_name(Var{id}) != "relu") continue;
    for (double v : tape.value(tape.inputs(Var{id}).front()).values()) out.push_back(v > 0.0);
  }
}

}  // namespace

denoiser::DenoiserConfig toy_config(denoiser::Variant variant) {
  denoiser::DenoiserConfig c;
  c.variant = variant;
  c.model_dim = 32;
  c.n_heads = 2;
  c.obs_frames = 4;
  c.future_frames = 5;
  c.pose_dim = 6;
  c.n_steps = 5;
  return c;
}

num::GradCheckResult check_end_to_end(denoiser::Variant variant, std::size_t probes, std::uint64_t seed,
                                      double tolerance) {
  const denoiser::DenoiserConfig cfg = toy_config(variant);
  const diffusion::NoiseSchedule sched = diffusion::NoiseSchedule::linear(cfg.n_steps, 0.001, 0.333);
  denoiser::DenoiserModel model(cfg, num::derive_seed(seed, 0), false);
  num::Rng rng(num::derive_seed(seed, 1));

  std::vector<motion::PredictionTask> tasks;
  std::vector<int> steps;
  std::vector<DenseArray> eps;
  for (int i = 0; i < 2; ++i) {
    tasks.push_back({rng.normal_array({cfg.obs_frames, cfg.pose_dim}), rng.normal_array({cfg.future_frames, cfg.pose_dim})});
    steps.push_back(1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.n_steps))));
    eps.push_back(rng.normal_array({cfg.future_frames, cfg.pose_dim}));
  }
  // Loss and the side of every ReLU input. Central differences are only valid
  // when both evaluations stay on the same linear piece as the base point.
  auto evaluate = [&](std::vector<bool>& pattern) {
    Tape tape(false);
    const double loss = tape.value(diffusion::diffusion_loss(tape, model, tasks, steps, eps, sched)).item();
    relu_pattern(tape, pattern);
    return loss;
  };
  Tape tape;
  const num::Gradients grads = tape.backward(diffusion::diffusion_loss(tape, model, tasks, steps, eps, sched));
  std::vector<bool> base, up_pattern, down_pattern;
  relu_pattern(tape, base);

  std::vector<std::string> names;
  for (const auto& [name, value] : model.parameters()) names.push_back(name);
  num::GradCheckResult result{denoiser::to_string(variant) + " end-to-end", 0.0, probes, 0, true};
  const double h = 1e-5;
  for (std::size_t p = 0; p < probes;) {
    const std::string& name = names[rng.uniform_index(names.size())];
    DenseArray& value = model.parameter(name);
    const std::size_t idx = rng.uniform_index(value.size());
    const double orig = value[idx];
    value[idx] = orig + h;
    const double up = evaluate(up_pattern);
    value[idx] = orig - h;
    const double down = evaluate(down_pattern);
    value[idx] = orig;
    if (up_pattern != base || down_pattern != base) {
      if (++result.rejected > 100 * probes) throw NumericError("gradient check found no probe away from a ReLU kink");
      continue;
    }
    const double err = num::relative_error(grads.at(name)[idx], (up - down) / (2.0 * h));
    result.worst_rel_error = std::max(result.worst_rel_error, err);
    ++p;
  }
  result.passed = result.worst_rel_error < tolerance;
  return result;
}

std::vector<num::GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  num::Rng data(num::derive_seed(seed, 2));
  auto rnd = [&](num::Shape s) { return data.normal_array(std::move(s)); };
  // Keeps relu inputs away from the kink, where central differences are meaningless.
  auto off_kink = [&](num::Shape s) {
    DenseArray a = rnd(std::move(s));
    for (double& v : a.values()) v += v >= 0.0 ? 0.1 : -0.1;
    return a;
  };

  struct OpCase {
    const char* name;
    TapeFn fn;
    std::vector<DenseArray> inputs;
  };
  const std::vector<OpCase> cases = {
      {"matmul", [](Tape& t, std::span<const Var> x) { return num::matmul(t, x[0], x[1]); }, {rnd({2, 3, 4}), rnd({4, 5})}},
      {"batched_matmul", [](Tape& t, std::span<const Var> x) { return num::batched_matmul(t, x[0], x[1]); },
       {rnd({3, 2, 4}), rnd({3, 4, 5})}},
      {"batched_matmul_t", [](Tape& t, std::span<const Var> x) { return num::batched_matmul(t, x[0], x[1], true); },
       {rnd({3, 2, 4}), rnd({3, 5, 4})}},
      {"add", [](Tape& t, std::span<const Var> x) { return num::add(t, x[0], x[1]); }, {rnd({3, 4}), rnd({3, 4})}},
      {"sub", [](Tape& t, std::span<const Var> x) { return num::sub(t, x[0], x[1]); }, {rnd({3, 4}), rnd({3, 4})}},
      {"mul", [](Tape& t, std::span<const Var> x) { return num::mul(t, x[0], x[1]); }, {rnd({3, 4}), rnd({3, 4})}},
      {"scale", [](Tape& t, std::span<const Var> x) { return num::scale(t, x[0], -1.7); }, {rnd({3, 4})}},
      {"add_row", [](Tape& t, std::span<const Var> x) { return num::add_row(t, x[0], x[1]); }, {rnd({3, 4}), rnd({4})}},
      {"relu", [](Tape& t, std::span<const Var> x) { return num::relu(t, x[0]); }, {off_kink({3, 4})}},
      {"softmax_rows", [](Tape& t, std::span<const Var> x) { return num::softmax_rows(t, x[0]); }, {rnd({3, 5})}},
      {"layer_norm", [](Tape& t, std::span<const Var> x) { return num::layer_norm(t, x[0], x[1], x[2]); },
       {rnd({3, 6}), rnd({6}), rnd({6})}},
      {"sum", [](Tape& t, std::span<const Var> x) { return num::sum(t, x[0]); }, {rnd({3, 4})}},
      {"mean", [](Tape& t, std::span<const Var> x) { return num::mean(t, x[0]); }, {rnd({3, 4})}},
      {"gather", [](Tape& t, std::span<const Var> x) { return num::gather(t, x[0], {0, 5, 5, 11, 2, 7}, {2, 3}); },
       {rnd({3, 4})}},
      {"gather_rows", [](Tape& t, std::span<const Var> x) { return num::gather_rows(t, x[0], {2, 0, 2}); }, {rnd({3, 4})}},
      {"concat_last", [](Tape& t, std::span<const Var> x) { return num::concat_last(t, x[0], x[1]); },
       {rnd({3, 2}), rnd({3, 4})}},
      {"reshape", [](Tape& t, std::span<const Var> x) { return num::reshape(t, x[0], {4, 3}); }, {rnd({3, 4})}},
  };

  std::vector<num::GradCheckResult> out;
  num::Rng probe_rng(num::derive_seed(seed, 3));
  for (const OpCase& c : cases) out.push_back(num::check_op_gradient(c.name, c.fn, c.inputs, 12, probe_rng, tolerance));
  out.push_back(check_end_to_end(denoiser::Variant::series, 8, num::derive_seed(seed, 4), tolerance));
  out.push_back(check_end_to_end(denoiser::Variant::parallel, 8, num::derive_seed(seed, 5), tolerance));
  return out;
}

}  // namespace mdiff::training

#include "mdiff/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mdiff/errors.hpp"
#include "mdiff/numerics/ops.hpp"

namespace mdiff::num {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::string input_name(std::size_t i) { return "input" + std::to_string(i); }

double evaluate(const TapeFn& fn, const std::vector<DenseArray>& inputs) {
  Tape tape(false);
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const DenseArray& in : inputs) leaves.push_back(tape.constant(in));
  return tape.value(fn(tape, leaves)).item();
}

}  // namespace

GradCheckResult check_scalar_gradient(std::string name, const TapeFn& scalar_fn,
                                      const std::vector<DenseArray>& inputs, std::size_t probes, Rng& rng,
                                      double tolerance, double step) {
  Gradients grads;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.parameter(input_name(i), inputs[i]));
    grads = tape.backward(scalar_fn(tape, leaves));
  }

  std::size_t total = 0;
  for (const DenseArray& in : inputs) total += in.size();
  if (total == 0) throw ContractError("gradient check '" + name + "' has no inputs");

  GradCheckResult result{std::move(name), 0.0, probes, 0, true};
  std::vector<DenseArray> shifted = inputs;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t flat = rng.uniform_index(total);
    std::size_t which = 0;
    while (flat >= inputs[which].size()) flat -= inputs[which++].size();

    const double original = inputs[which][flat];
    shifted[which][flat] = original + step;
    const double plus = evaluate(scalar_fn, shifted);
    shifted[which][flat] = original - step;
    const double minus = evaluate(scalar_fn, shifted);
    shifted[which][flat] = original;

    const double numeric = (plus - minus) / (2.0 * step);
    const double analytic = grads.at(input_name(which))[flat];
    result.worst_rel_error = std::max(result.worst_rel_error, relative_error(analytic, numeric));
  }
  result.passed = result.worst_rel_error < tolerance;
  return result;
}

GradCheckResult check_op_gradient(std::string name, const TapeFn& op, const std::vector<DenseArray>& inputs,
                                  std::size_t probes, Rng& rng, double tolerance, double step) {
  Shape out_shape;
  {
    Tape tape(false);
    std::vector<Var> leaves;
    for (const DenseArray& in : inputs) leaves.push_back(tape.constant(in));
    out_shape = tape.shape(op(tape, leaves));
  }
  const DenseArray weights = rng.uniform_array(out_shape, -1.0, 1.0);
  const TapeFn contracted = [&op, &weights](Tape& tape, std::span<const Var> leaves) {
    return sum(tape, mul(tape, op(tape, leaves), tape.constant(weights)));
  };
  return check_scalar_gradient(std::move(name), contracted, inputs, probes, rng, tolerance, step);
}

}  // namespace mdiff::num

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mdiff/numerics/random.hpp"
#include "mdiff/numerics/tape.hpp"

namespace mdiff::num {

struct GradCheckResult {
  std::string name;
  double worst_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t rejected = 0;  // probes redrawn because +-h fell on different sides of a kink
  bool passed = false;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// vanishing gradients from turning round-off into large relative errors.
inline constexpr double kRelErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

// Builds a node on `tape` from one leaf per input.
using TapeFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

// Compares backward() against central differences at `probes` randomly chosen
// input entries. `scalar_fn` must return a scalar node.
GradCheckResult check_scalar_gradient(std::string name, const TapeFn& scalar_fn,
                                      const std::vector<DenseArray>& inputs, std::size_t probes, Rng& rng,
                                      double tolerance, double step = 1e-5);

// Same check for an array-valued op, contracted with a fixed random weight
// array: L = sum(op(x) * W). This probes a random vector-Jacobian product.
GradCheckResult check_op_gradient(std::string name, const TapeFn& op, const std::vector<DenseArray>& inputs,
                                  std::size_t probes, Rng& rng, double tolerance, double step = 1e-5);

}  // namespace mdiff::num

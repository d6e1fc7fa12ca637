#pragma once

#include <cstdint>
#include <vector>

#include "mdiff/denoiser/config.hpp"
#include "mdiff/numerics/gradcheck.hpp"

namespace mdiff::training {

inline constexpr double kGradCheckTolerance = 1e-4;

// model_dim 32, 2 heads, T 4, L 5, D 6, K 5.
denoiser::DenoiserConfig toy_config(denoiser::Variant variant);

// Loss gradient of a randomly initialized model (nonzero output projection) on a
// random two-item batch, checked against central differences at `probes`
// random parameter entries. A probe whose +-h evaluations put any ReLU input on
// the other side of zero is redrawn, since the loss is not smooth across it.
num::GradCheckResult check_end_to_end(denoiser::Variant variant, std::size_t probes, std::uint64_t seed,
                                      double tolerance = kGradCheckTolerance);

// Every tape op on random inputs, then both denoiser variants end to end.
// One result per check, carrying its worst relative error.
std::vector<num::GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double tolerance = kGradCheckTolerance);

}  // namespace mdiff::training

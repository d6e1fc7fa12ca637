#pragma once

#include <cstddef>

#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::denoiser {

// len x dim sinusoid table: PE[p, 2i] = sin(p / 10000^(2i/dim)), PE[p, 2i+1] = cos(same).
// Throws ConfigError for odd dim.
num::DenseArray positional_encoding(std::size_t len, std::size_t dim);

// Stacks p_obs (T x D) above p_k (L x D). Throws DimensionError on a column
// mismatch or an empty observation.
num::DenseArray assemble_input(const num::DenseArray& p_obs, const num::DenseArray& p_k);

}  // namespace mdiff::denoiser

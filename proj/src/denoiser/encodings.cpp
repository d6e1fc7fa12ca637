#include "mdiff/denoiser/encodings.hpp"

#include <cmath>

#include "mdiff/errors.hpp"

namespace mdiff::denoiser {

num::DenseArray positional_encoding(std::size_t len, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ConfigError("positional encoding needs an even width, got " + std::to_string(dim));
  num::DenseArray pe({len, dim});
  for (std::size_t p = 0; p < len; ++p) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(p) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe.at(p, 2 * i) = std::sin(angle);
      pe.at(p, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

num::DenseArray assemble_input(const num::DenseArray& p_obs, const num::DenseArray& p_k) {
  if (p_obs.rank() != 2 || p_k.rank() != 2) throw DimensionError("assemble_input expects matrices");
  if (p_obs.extent(0) == 0) throw DimensionError("assemble_input needs at least one observed frame");
  if (p_obs.extent(1) != p_k.extent(1)) {
    throw DimensionError("assemble_input: observation has " + std::to_string(p_obs.extent(1)) +
                         " columns, noisy future has " + std::to_string(p_k.extent(1)));
  }
  return num::concat_rows(p_obs, p_k);
}

}  // namespace mdiff::denoiser

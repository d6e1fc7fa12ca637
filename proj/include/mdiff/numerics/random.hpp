#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::num {

// Seeded random stream with platform-independent output: mt19937_64 is fully
// specified by the standard, and the conversions below are written out here
// instead of relying on the library's distribution objects.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is kept for the next call.
  double normal();

  DenseArray normal_array(const Shape& shape);
  DenseArray uniform_array(const Shape& shape, double lo, double hi);

  // Full engine state including the cached normal, as text.
  std::string state() const;
  void set_state(const std::string& text);

  bool operator==(const Rng& other) const = default;

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Mixes a root seed and a stream index into an independent seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace mdiff::num

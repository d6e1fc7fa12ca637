#include "mdiff/numerics/random.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mdiff/errors.hpp"

namespace mdiff::num {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index needs a positive bound");
  // Reject the incomplete top block so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

DenseArray Rng::normal_array(const Shape& shape) {
  DenseArray out(shape);
  for (double& v : out.values()) v = normal();
  return out;
}

DenseArray Rng::uniform_array(const Shape& shape, double lo, double hi) {
  DenseArray out(shape);
  for (double& v : out.values()) v = lo + (hi - lo) * uniform();
  return out;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  if (spare_) {
    os << " spare " << std::bit_cast<std::uint64_t>(*spare_);
  }
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 engine;
  is >> engine;
  if (!is) throw ParseError("malformed RNG state", static_cast<std::size_t>(0));
  std::optional<double> spare;
  std::string tag;
  if (is >> tag) {
    std::uint64_t bits = 0;
    if (tag != "spare" || !(is >> bits)) throw ParseError("malformed RNG spare value", 0);
    spare = std::bit_cast<double>(bits);
  }
  engine_ = engine;
  spare_ = spare;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mdiff::num

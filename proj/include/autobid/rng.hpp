#pragma once
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace autobid {

// Seed for a named sub-stream of a root seed. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Thin wrapper over mt19937_64. The std distributions are implementation
// defined, so draws are built directly from the engine output to keep
// scenarios byte-identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double canonical();
  // Uniform in [lo, hi]; lo == hi returns lo.
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Index drawn proportionally to non-negative weights.
  std::size_t pick(std::span<const double> weights);

private:
  std::mt19937_64 engine_;
};

} // namespace autobid

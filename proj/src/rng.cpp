#include "autobid/rng.hpp"

#include "autobid/error.hpp"

namespace autobid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  return splitmix64(splitmix64(root) ^ fnv1a(stream));
}

double Rng::canonical() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (lo == hi) {
    return lo;
  }
  return lo + (hi - lo) * canonical();
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) {
    throw DomainError("uniform_int: empty range");
  }
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) {
    return static_cast<std::int64_t>(engine_());
  }
  return lo + static_cast<std::int64_t>(engine_() % span);
}

std::size_t Rng::pick(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) {
      throw DomainError("pick: negative weight");
    }
    total += w;
  }
  if (weights.empty() || total <= 0.0) {
    throw DomainError("pick: weights must have a positive sum");
  }
  double u = canonical() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) {
      return i;
    }
    u -= weights[i];
  }
  // Rounding can leave u at the very top; fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) {
      return i;
    }
  }
  return weights.size() - 1;
}

} // namespace autobid

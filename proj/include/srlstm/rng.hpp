#pragma once

// Seeding scheme shared by every random consumer.
//
// The generator is std::mt19937_64 everywhere. A substream is identified by
// a tuple of 64-bit keys (master seed, purpose tag, model, condition,
// example, step, ...); the tuple is folded through the SplitMix64 finalizer
// into a single seed. Because each unit of work seeds its own generator from
// its coordinates, results do not depend on how work is scheduled.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numbers>
#include <random>
#include <utility>

namespace srlstm::rng {

using Engine = std::mt19937_64;

/// Purpose tags keep substreams for different consumers disjoint.
enum class Stream : std::uint64_t {
  member = 0x6d656d62,   // ensemble member seed
  init = 0x696e6974,     // weight initialization
  shuffle = 0x73687566,  // epoch order
  noise = 0x6e6f6973,    // test-time perturbation
  dataset = 0x64617461,  // dataset construction order
  sample = 0x73616d70,   // example selection for rendering
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

inline std::uint64_t double_bits(double v) noexcept {
  if (v == 0.0) v = 0.0;  // fold -0.0
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return bits;
}

inline Engine make_engine(std::initializer_list<std::uint64_t> keys) {
  return Engine(derive_seed(keys));
}

/// 53-bit uniform in [0, 1).
inline double uniform01(Engine& gen) noexcept {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Two independent standard normals (Box-Muller).
inline std::pair<double, double> standard_normal_pair(Engine& gen) noexcept {
  const double u1 = 1.0 - uniform01(gen);  // (0, 1]
  const double u2 = uniform01(gen);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t uniform_below(Engine& gen, std::uint64_t bound) noexcept {
  const std::uint64_t limit = Engine::max() - Engine::max() % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

/// Fisher-Yates with a pinned index draw, so orderings are identical across
/// standard library implementations.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Engine& gen) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_below(gen, i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace srlstm::rng

#pragma once

// Portable seeded randomness. std:: distributions are implementation-defined,
// so every draw used for persisted artifacts is spelled out here:
//
//   stream seed   = splitmix64(root ^ (stream_id * 0x9E3779B97F4A7C15))
//   engine        = std::mt19937_64(stream seed)
//   uniform01()   = (engine() >> 11) * 2^-53                    in [0, 1)
//   uniform(a, b) = a + (b - a) * uniform01()
//   index(n)      = engine() % n, rejecting draws >= n * floor(2^64 / n)
//   shuffle       = Fisher-Yates: for i = n .. 2, swap(i - 1, index(i))

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace tvkd {

enum class Stream : std::uint64_t {
  Rewards = 1,
  Pairs = 2,
  Split = 3,
  Training = 4,
  Init = 5,
  Verification = 6,
  Instances = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, Stream stream) {
  return splitmix64(root ^ (static_cast<std::uint64_t>(stream) * 0x9E3779B97F4A7C15ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, Stream stream) : engine_(derive_seed(root, stream)) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double low, double high) { return low + (high - low) * uniform01(); }

  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via Box-Muller on two uniform01 draws.
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tvkd

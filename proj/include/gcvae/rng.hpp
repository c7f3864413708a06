#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gcvae/matrix.hpp"

namespace gcvae {

/// Counter-based generator: draw k of a stream is a pure function of (key, k), the
/// SplitMix64 finalizer applied to key + k * golden_gamma. Bit-identical on every
/// platform for the integer stream, trivially serializable, and splittable into
/// independent named sub-streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed)), seed_(seed) {}

  struct State {
    std::uint64_t seed = 0;
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    friend bool operator==(const State&, const State&) = default;
  };
  State state() const { return {seed_, key_, counter_}; }
  static Rng from_state(const State& s);

  std::uint64_t next_u64() { return mix(key_ + (counter_++) * kGamma); }
  /// Uniform on (0, 1), clamped to [1e-12, 1 - 1e-12].
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream; does not advance this stream.
  Rng split(std::uint64_t tag) const;
  Rng split(std::string_view tag) const;

  /// Reserve `count` consecutive counters and return the first; lets parallel
  /// kernels draw element k from counter base+k without shared state.
  std::uint64_t reserve(std::uint64_t count) {
    const auto base = counter_;
    counter_ += count;
    return base;
  }
  std::uint64_t at(std::uint64_t counter) const { return mix(key_ + counter * kGamma); }

  static std::uint64_t mix(std::uint64_t z);
  static std::uint64_t hash_bytes(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t seed_ = 0;
};

/// Map a raw 64-bit draw to (0,1) with the documented clamp.
double to_unit_interval(std::uint64_t bits);

/// i.i.d. N(0,1) via Box-Muller; OpenMP-parallel over pairs, deterministic in the seed.
Matrix sample_standard_normal(Rng& rng, std::size_t rows, std::size_t cols);

/// Gumbel(0,1) draws -log(-log u).
std::vector<double> sample_gumbel(Rng& rng, std::size_t n);
double gumbel_from_uniform(double u);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace gcvae

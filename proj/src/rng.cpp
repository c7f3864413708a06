#include "gcvae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gcvae/kernels.hpp"

namespace gcvae {

namespace {
constexpr double kUnitLo = 1e-12;
constexpr double kUnitHi = 1.0 - 1e-12;
}  // namespace

std::uint64_t Rng::mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::hash_bytes(const void* data, std::size_t len, std::uint64_t h) {
  // FNV-1a
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::from_state(const State& s) {
  Rng r(s.seed);
  r.key_ = s.key;
  r.counter_ = s.counter;
  return r;
}

double to_unit_interval(std::uint64_t bits) {
  const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  return std::clamp(u, kUnitLo, kUnitHi);
}

double Rng::uniform() { return to_unit_interval(next_u64()); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  while (true) {
    const std::uint64_t x = next_u64();
    const auto m = static_cast<unsigned __int128>(x) * n;
    const auto lo = static_cast<std::uint64_t>(m);
    if (lo >= n || lo >= (0 - n) % n) return static_cast<std::uint64_t>(m >> 64);
  }
}

Rng Rng::split(std::uint64_t tag) const {
  Rng child(seed_);
  child.key_ = mix(key_ ^ mix(tag ^ 0xD1B54A32D192ED03ULL));
  return child;
}

Rng Rng::split(std::string_view tag) const { return split(hash_bytes(tag.data(), tag.size())); }

Matrix sample_standard_normal(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix out(rows, cols);
  const std::size_t total = rows * cols;
  const std::size_t pairs = (total + 1) / 2;
  const std::uint64_t base = rng.reserve(2 * pairs);
  double* dst = out.data();
  const Rng& stream = rng;
  kernels::for_each_row(pairs, [&](std::size_t p) {
    const double u1 = to_unit_interval(stream.at(base + 2 * p));
    const double u2 = to_unit_interval(stream.at(base + 2 * p + 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    dst[2 * p] = r * std::cos(t);
    if (2 * p + 1 < total) dst[2 * p + 1] = r * std::sin(t);
  });
  return out;
}

double gumbel_from_uniform(double u) {
  u = std::clamp(u, kUnitLo, kUnitHi);
  return -std::log(-std::log(u));
}

std::vector<double> sample_gumbel(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& g : out) g = gumbel_from_uniform(rng.uniform());
  return out;
}

std::vector<std::size_t> permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace gcvae

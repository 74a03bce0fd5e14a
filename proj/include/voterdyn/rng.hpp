#pragma once

// Seeded random streams.
//
// Every random quantity is drawn from a SplitMix64 stream whose starting state
// is a hash of (master seed, replication, vertex or edge ids). Streams are
// counter based: draw k of a stream is a pure function of (key, k), so lazily
// materialized edges produce the same values no matter when or in which order
// they are first touched, and on which worker.
//
// Seed policy:
//   replication r          -> key(seed, r)
//   vertex v in rep r      -> key(seed, r, v)
//   edge {u,v}, u < v      -> key(seed, r, u, v)
//
// Uniforms and exponentials are produced by explicit bit manipulation and
// inverse transform instead of <random> distributions, whose algorithms are
// implementation defined; results are therefore identical across toolchains.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace voterdyn::rng {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v + kGamma));
}

/// Hash of the master seed and an ordered list of stream coordinates.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  for (std::uint64_t p : parts) h = combine(h, p);
  return combine(h, static_cast<std::uint64_t>(parts.size()));
}

/// FNV-1a, for turning experiment names into seed salts.
constexpr std::uint64_t hash_name(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child master seed for a named sub-experiment.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index = 0) noexcept {
  return derive_key(seed, {hash_name(name), index});
}

constexpr std::uint64_t replication_key(std::uint64_t seed, std::uint64_t r) noexcept {
  return derive_key(seed, {r});
}
constexpr std::uint64_t vertex_key(std::uint64_t seed, std::uint64_t r, std::uint64_t v) noexcept {
  return derive_key(seed, {r, v});
}
constexpr std::uint64_t edge_key(std::uint64_t seed, std::uint64_t r, std::uint64_t u,
                                 std::uint64_t v) noexcept {
  return u < v ? derive_key(seed, {r, u, v}) : derive_key(seed, {r, v, u});
}

/// Sub-stream of a key, used to separate independent uses of one stream.
constexpr std::uint64_t substream(std::uint64_t key, std::uint64_t tag) noexcept {
  return combine(key, tag ^ 0x5bd1e995ULL);
}

/// Draw k of the stream with the given key.
constexpr std::uint64_t bits_at(std::uint64_t key, std::uint64_t k) noexcept {
  return mix64(key + (k + 1) * kGamma);
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double uniform_at(std::uint64_t key, std::uint64_t k) noexcept {
  return to_unit(bits_at(key, k));
}

/// Sequential view of a counter stream. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key, std::uint64_t start = 0) noexcept
      : key_(key), counter_(start) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return bits_at(key_, counter_++); }

  constexpr double uniform() noexcept { return to_unit((*this)()); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Exp(rate) by inverse transform. rate must be positive.
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

  /// Uniform integer in [0, bound) by multiply-shift (bound > 0).
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace voterdyn::rng

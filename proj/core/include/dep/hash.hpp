#pragma once

// Deterministic hashing and random streams. Every stochastic choice in the
// project flows through these primitives so that runs are bit-reproducible
// across platforms.
//
// String hashing is 64-bit FNV-1a (offset basis 14695981039346656037,
// prime 1099511628211). Seed handling: fnv1a64(bytes) is mixed with the
// caller's seed via splitmix64(h ^ seed). Both functions are fixed here,
// bit-exactly, so independent implementations can reproduce every vector.

#include <cstdint>
#include <string>
#include <string_view>

namespace dep {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Incremental FNV-1a accumulator for content hashes of large artifacts.
class HashAccumulator {
  public:
    void update(std::string_view bytes) { h_ = fnv1a64(bytes, h_); }
    void update_u64(std::uint64_t v);
    void update_f64(double v);
    std::uint64_t digest() const { return h_; }
    std::string hex() const;

  private:
    std::uint64_t h_ = kFnvOffset;
};

std::string to_hex(std::uint64_t v);

// Deterministic random stream: a splitmix64 sequence walked from a seed.
// Uniform doubles use the 53-bit construction; gauss is Box-Muller with a
// cached spare; bounded ints use 128-bit multiply (no modulo bias).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((u128(next_u64()) * u128(n)) >> 64);
    }

    // Uniform in [lo, hi].
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    double next_gauss(double mu = 0.0, double sigma = 1.0);

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derive an independent stream for a named subtask of a run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ fnv1a64(tag)) ^ index);
}

}  // namespace dep

#pragma once

// Seeded random streams with portable conversions.
//
// The standard distributions are implementation-defined, so every draw that
// feeds a run log goes through the conversions below instead. The engine
// itself (mt19937_64) is fully specified by the standard.

#include <cstdint>
#include <random>
#include <string_view>

namespace rosevo {

/// FNV-1a over bytes, used for stable stream derivation and bundle digests.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finaliser; mixes a counter or seed into a well-spread word.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), rejection-sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (one value per call).
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace rosevo

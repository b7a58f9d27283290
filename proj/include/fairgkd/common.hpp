#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fairgkd {

inline constexpr std::string_view kVersion = "0.1.0";

// ----------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes: UsageError -> 1,
// DataError / MetricError / ContractError -> 2, TrainError -> 3.
// ----------------------------------------------------------------------------
class FairgkdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command line or config file.
class UsageError : public FairgkdError {
public:
    using FairgkdError::FairgkdError;
};

/// Malformed or inconsistent input data (files, matrices, parameters).
class DataError : public FairgkdError {
public:
    using FairgkdError::FairgkdError;
};

/// Training failure: divergence, balancer invariant violation.
class TrainError : public FairgkdError {
public:
    using FairgkdError::FairgkdError;
};

/// A metric is mathematically undefined on the given inputs (e.g. an empty
/// demographic group). Raised instead of returning a silent zero.
class MetricError : public FairgkdError {
public:
    using FairgkdError::FairgkdError;
};

/// API precondition violated by the caller (shape mismatch, unfrozen model
/// where a frozen one is required, wrong view kind).
class ContractError : public FairgkdError {
public:
    using FairgkdError::FairgkdError;
};

// ----------------------------------------------------------------------------
// Deterministic RNG.
//
// mt19937_64 output is fully specified by the standard, and every
// distribution below is derived from it with explicit arithmetic, so a seed
// reproduces the same stream on any platform. Never use std:: distributions
// here: their mapping from engine output is implementation defined.
// ----------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling keeps the distribution exact and deterministic.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    /// Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ----------------------------------------------------------------------------
// FNV-1a hashing, used for stream derivation, parameter checksums and the
// config hash embedded in every report.
// ----------------------------------------------------------------------------
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

/// Derives an independent seed for a named stage of a run, so e.g. student
/// initialization draws the same stream whether the run is a vanilla baseline
/// or a distillation (the bit-identity contract between the two relies on it).
inline uint64_t derive_seed(uint64_t seed, std::string_view stream) {
    uint64_t z = fnv1a(stream) ^ (seed + 0x9e3779b97f4a7c15ull);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

} // namespace fairgkd

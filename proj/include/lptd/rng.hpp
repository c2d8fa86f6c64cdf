#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string_view>

#include <gmpxx.h>

namespace lptd {

// Deterministic randomness source. Every stochastic decision in the library
// flows through one of these, seeded from the scenario seed, so runs replay
// bit-identically. Gaussian and uniform doubles are produced from the raw
// engine output directly rather than through std distributions, whose
// algorithms vary across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed);
    ~Rng();

    Rng(const Rng&) = delete;
    Rng& operator=(const Rng&) = delete;
    Rng(Rng&&) noexcept;
    Rng& operator=(Rng&&) noexcept;

    uint64_t seed() const { return seed_; }
    uint64_t next_u64();

    // Uniform double in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller.
    double gaussian();
    double gaussian(double mean, double sigma);
    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Uniform big integer in [0, bound).
    mpz_class below(const mpz_class& bound);
    // Uniform big integer with exactly `bits` bits (top bit set).
    mpz_class bits(unsigned bits);

    // Independent child generator; deterministic in (seed, label).
    Rng fork(std::string_view label) const;

private:
    uint64_t seed_ = 0;
    std::mt19937_64 eng_;
    gmp_randstate_t gst_;
    bool gst_live_ = false;
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_ = false;
};

// Derives a child seed from (seed, label) by hashing; used by Rng::fork and
// anywhere a stable named substream is needed.
uint64_t derive_seed(uint64_t seed, std::string_view label);

}  // namespace lptd

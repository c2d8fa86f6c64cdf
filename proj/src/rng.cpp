#include "lptd/rng.hpp"

#include <cmath>
#include <numbers>

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"
#include "lptd/sha256.hpp"

namespace lptd {

uint64_t derive_seed(uint64_t seed, std::string_view label) {
    ByteWriter w;
    w.u64(seed);
    w.str_lp(std::string(label));
    HashVal h = sha256(w.data());
    uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | h[i];
    return out;
}

Rng::Rng(uint64_t seed) : seed_(seed), eng_(seed) {
    gmp_randinit_mt(gst_);
    gmp_randseed_ui(gst_, static_cast<unsigned long>(seed ^ 0x9e3779b97f4a7c15ULL));
    gst_live_ = true;
}

Rng::~Rng() {
    if (gst_live_) gmp_randclear(gst_);
}

Rng::Rng(Rng&& other) noexcept
    : seed_(other.seed_),
      eng_(other.eng_),
      cached_gauss_(other.cached_gauss_),
      has_cached_gauss_(other.has_cached_gauss_) {
    if (other.gst_live_) {
        gst_[0] = other.gst_[0];
        gst_live_ = true;
        other.gst_live_ = false;
    }
}

Rng& Rng::operator=(Rng&& other) noexcept {
    if (this != &other) {
        if (gst_live_) gmp_randclear(gst_);
        seed_ = other.seed_;
        eng_ = other.eng_;
        cached_gauss_ = other.cached_gauss_;
        has_cached_gauss_ = other.has_cached_gauss_;
        gst_live_ = other.gst_live_;
        if (other.gst_live_) {
            gst_[0] = other.gst_[0];
            other.gst_live_ = false;
        }
    }
    return *this;
}

uint64_t Rng::next_u64() { return eng_(); }

double Rng::uniform() {
    // 53 high bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    cached_gauss_ = r * std::sin(theta);
    has_cached_gauss_ = true;
    return r * std::cos(theta);
}

double Rng::gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) raise(Errc::range_error, "uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
    // Rejection sampling to avoid modulo bias.
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
}

mpz_class Rng::below(const mpz_class& bound) {
    if (bound <= 0) raise(Errc::range_error, "below: bound must be positive");
    mpz_class out;
    mpz_urandomm(out.get_mpz_t(), gst_, bound.get_mpz_t());
    return out;
}

mpz_class Rng::bits(unsigned nbits) {
    if (nbits == 0) raise(Errc::range_error, "bits: need at least one bit");
    mpz_class out;
    mpz_urandomb(out.get_mpz_t(), gst_, nbits);
    mpz_setbit(out.get_mpz_t(), nbits - 1);
    return out;
}

Rng Rng::fork(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

}  // namespace lptd

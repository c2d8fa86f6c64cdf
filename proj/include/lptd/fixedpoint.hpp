#pragma once

#include <cstdint>

#include <gmpxx.h>

namespace lptd {

// Power-of-ten fixed-point mapping between reals and the integer plaintext
// domain. Observations and weights carry separate scales; products of the
// two carry both, and decode must be told how many factors a value holds.
struct FixedPointCodec {
    int64_t scale_obs = 10'000;
    int64_t scale_wt = 1'000'000;
    // Plaintext magnitude bound (n/2 when bound to a key); 0 disables.
    mpz_class max_abs = 0;
};

enum class Scale { obs, wt, obs_wt };

int64_t fp_encode(const FixedPointCodec& codec, double v, Scale s = Scale::obs);
double fp_decode(const FixedPointCodec& codec, const mpz_class& v, Scale s = Scale::obs);
double fp_decode(const FixedPointCodec& codec, int64_t v, Scale s = Scale::obs);

}  // namespace lptd

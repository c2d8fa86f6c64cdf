#include "lptd/fixedpoint.hpp"

#include <cmath>
#include <limits>

#include "lptd/errors.hpp"

namespace lptd {

namespace {

double scale_factor(const FixedPointCodec& codec, Scale s) {
    switch (s) {
        case Scale::obs: return static_cast<double>(codec.scale_obs);
        case Scale::wt: return static_cast<double>(codec.scale_wt);
        case Scale::obs_wt:
            return static_cast<double>(codec.scale_obs) * static_cast<double>(codec.scale_wt);
    }
    return 1.0;
}

}  // namespace

int64_t fp_encode(const FixedPointCodec& codec, double v, Scale s) {
    if (!std::isfinite(v)) raise(Errc::range_error, "fp_encode: non-finite value");
    double scaled = v * scale_factor(codec, s);
    // Nudge compensates the rounding of decode(encode(x)) so integer units
    // survive a round trip; it stays far below one unit.
    double nudge = std::fabs(scaled) * 0x1.0p-48 + std::numeric_limits<double>::min();
    double floored = std::floor(scaled + nudge);
    if (std::fabs(floored) >= 0x1.0p62)
        raise(Errc::range_error, "fp_encode: value exceeds 62-bit unit range");
    int64_t units = static_cast<int64_t>(floored);
    if (codec.max_abs != 0) {
        mpz_class mag = units >= 0 ? mpz_class(static_cast<unsigned long>(units))
                                   : mpz_class(static_cast<unsigned long>(-units));
        if (mag >= codec.max_abs) raise(Errc::range_error, "fp_encode: value exceeds plaintext bound");
    }
    return units;
}

double fp_decode(const FixedPointCodec& codec, const mpz_class& v, Scale s) {
    return mpz_get_d(v.get_mpz_t()) / scale_factor(codec, s);
}

double fp_decode(const FixedPointCodec& codec, int64_t v, Scale s) {
    return static_cast<double>(v) / scale_factor(codec, s);
}

}  // namespace lptd

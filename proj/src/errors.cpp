#include "lptd/errors.hpp"

namespace lptd {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::generation_exhausted: return "generation-exhausted";
        case Errc::cannot_split: return "cannot-split";
        case Errc::malformed_ciphertext: return "malformed-ciphertext";
        case Errc::mask_mismatch: return "mask-mismatch";
        case Errc::range_error: return "range-error";
        case Errc::empty_aggregate: return "empty-aggregate";
        case Errc::invalid_length: return "invalid-length";
        case Errc::budget_exhausted: return "budget-exhausted";
        case Errc::missing_device: return "missing-device";
        case Errc::degenerate_weights: return "degenerate-weights";
        case Errc::corrupted_report: return "corrupted-report";
        case Errc::config_error: return "config-error";
        case Errc::accounting_failure: return "accounting-failure";
        case Errc::io_error: return "io-error";
    }
    return "unknown";
}

}  // namespace lptd

#pragma once

#include <stdexcept>
#include <string>

namespace lptd {

enum class Errc {
    generation_exhausted,
    cannot_split,
    malformed_ciphertext,
    mask_mismatch,
    range_error,
    empty_aggregate,
    invalid_length,
    budget_exhausted,
    missing_device,
    degenerate_weights,
    corrupted_report,
    config_error,
    accounting_failure,
    io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace lptd

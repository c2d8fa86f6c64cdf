#pragma once

#include <optional>
#include <vector>

#include <gmpxx.h>

#include "lptd/opcount.hpp"
#include "lptd/paillier.hpp"

namespace lptd {

// One-component masked encoding c = (1 + n*m) * h^s mod n^2. The plaintext
// is recoverable only once the mask exponents applied across all parties sum
// to zero modulo the mask-group order, or, when the g^s companion travels
// with the ciphertext, via split-key decryption against it.
struct MaskedCiphertext {
    mpz_class c;
    std::optional<mpz_class> g_part;  // g^s for the same s; fault-recovery mode only
};

// Device-side encryption from a precomputed h^s: two modular multiplications,
// no exponentiation.
MaskedCiphertext mask_encrypt(const PublicParams& pp, const mpz_class& m, const mpz_class& h_mask,
                              OpCounter* ctr = nullptr);
MaskedCiphertext mask_encrypt(const PublicParams& pp, const mpz_class& m, const mpz_class& h_mask,
                              const mpz_class& g_mask, OpCounter* ctr = nullptr);

// Product of ciphertexts, optionally folding in one extra h-power (a server
// mask). g-companions multiply alongside when every input carries one.
MaskedCiphertext aggregate_product(const PublicParams& pp, const std::vector<MaskedCiphertext>& cts,
                                   const std::optional<mpz_class>& extra_mask = std::nullopt,
                                   OpCounter* ctr = nullptr);

// Applies the final h-power and decodes; requires the full mask multiset to
// cancel, otherwise the residue is not divisible by n.
mpz_class unmask_decode(const PublicParams& pp, const MaskedCiphertext& ct,
                        const mpz_class& final_mask, OpCounter* ctr = nullptr);

// Split-key recovery against the g^s companion: divide by (g_part)^x1 then
// (g_part)^x2 and decode. Exact for whatever subset of reports is present.
mpz_class fault_decrypt(const PublicParams& pp, const MaskedCiphertext& ct, const KeyShares& shares,
                        OpCounter* ctr = nullptr);
// The two halves separately, matching the fog/cloud division of labour.
MaskedCiphertext fault_decrypt_partial(const PublicParams& pp, const MaskedCiphertext& ct,
                                       const mpz_class& share, OpCounter* ctr = nullptr);
mpz_class masked_decode(const PublicParams& pp, const MaskedCiphertext& ct);

}  // namespace lptd

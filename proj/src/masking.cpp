#include "lptd/masking.hpp"

#include "lptd/errors.hpp"

namespace lptd {

MaskedCiphertext mask_encrypt(const PublicParams& pp, const mpz_class& m, const mpz_class& h_mask,
                              OpCounter* ctr) {
    mpz_class mc = signed_to_canonical(pp, m);
    MaskedCiphertext out;
    mpz_class body = mulmod(pp.n, mc, pp.n_sq, ctr) + 1;
    out.c = mulmod(body, h_mask, pp.n_sq, ctr);
    return out;
}

MaskedCiphertext mask_encrypt(const PublicParams& pp, const mpz_class& m, const mpz_class& h_mask,
                              const mpz_class& g_mask, OpCounter* ctr) {
    MaskedCiphertext out = mask_encrypt(pp, m, h_mask, ctr);
    out.g_part = g_mask;
    return out;
}

MaskedCiphertext aggregate_product(const PublicParams& pp, const std::vector<MaskedCiphertext>& cts,
                                   const std::optional<mpz_class>& extra_mask, OpCounter* ctr) {
    if (cts.empty()) raise(Errc::empty_aggregate, "no ciphertexts to aggregate");
    MaskedCiphertext out = cts.front();
    for (size_t i = 1; i < cts.size(); ++i) {
        out.c = mulmod(out.c, cts[i].c, pp.n_sq, ctr);
        if (out.g_part && cts[i].g_part)
            out.g_part = mulmod(*out.g_part, *cts[i].g_part, pp.n_sq, ctr);
        else
            out.g_part.reset();
    }
    if (extra_mask) out.c = mulmod(out.c, *extra_mask, pp.n_sq, ctr);
    return out;
}

mpz_class unmask_decode(const PublicParams& pp, const MaskedCiphertext& ct,
                        const mpz_class& final_mask, OpCounter* ctr) {
    MaskedCiphertext unmasked;
    unmasked.c = mulmod(ct.c, final_mask, pp.n_sq, ctr);
    return masked_decode(pp, unmasked);
}

mpz_class fault_decrypt(const PublicParams& pp, const MaskedCiphertext& ct, const KeyShares& shares,
                        OpCounter* ctr) {
    MaskedCiphertext half = fault_decrypt_partial(pp, ct, shares.x1, ctr);
    MaskedCiphertext full = fault_decrypt_partial(pp, half, shares.x2, ctr);
    return masked_decode(pp, full);
}

MaskedCiphertext fault_decrypt_partial(const PublicParams& pp, const MaskedCiphertext& ct,
                                       const mpz_class& share, OpCounter* ctr) {
    if (!ct.g_part) raise(Errc::corrupted_report, "fault recovery needs the g^s companion");
    MaskedCiphertext out;
    mpz_class denom = powmod(*ct.g_part, share, pp.n_sq, ctr);
    out.c = mulmod(ct.c, invmod(denom, pp.n_sq, ctr), pp.n_sq, ctr);
    out.g_part = ct.g_part;
    return out;
}

mpz_class masked_decode(const PublicParams& pp, const MaskedCiphertext& ct) {
    mpz_class u = ct.c - 1;
    if (u < 0 || !mpz_divisible_p(u.get_mpz_t(), pp.n.get_mpz_t()))
        raise(Errc::mask_mismatch, "mask residue not divisible by n (missing or extra report?)");
    return canonical_to_signed(pp, u / pp.n);
}

}  // namespace lptd

#pragma once

#include <cstdint>
#include <string>

#include <gmpxx.h>

#include "lptd/opcount.hpp"
#include "lptd/rng.hpp"

namespace lptd {

// Modified Paillier over safe-prime moduli: pk = (n, g = mu^2, h = g^x),
// ciphertext (g^r, h^r(1+nm)), secret key x splittable into x1 + x2 for
// two-server decryption.

struct PublicParams {
    mpz_class n;
    mpz_class n_sq;
    mpz_class g;
    mpz_class h;
    unsigned kappa = 0;  // prime bit length

    mpz_class half_n() const { return n / 2; }
};

struct MasterKey {
    mpz_class x;
    mpz_class lambda;  // lcm(p-1, q-1) = 2 p' q'
    mpz_class p, q, p_prime, q_prime;

    // Order of the squares subgroup containing g; mask exponent shares are
    // drawn modulo this value so products of h-powers cancel exactly.
    mpz_class mask_modulus(const PublicParams& pp) const { return pp.n * lambda / 2; }
};

struct KeyShares {
    mpz_class x1;
    mpz_class x2;
};

struct PairCiphertext {
    mpz_class c1;
    mpz_class c2;
};

// --- modular helpers (operation-counted) ---
mpz_class mulmod(const mpz_class& a, const mpz_class& b, const mpz_class& mod, OpCounter* ctr);
mpz_class powmod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod, OpCounter* ctr);
mpz_class invmod(const mpz_class& a, const mpz_class& mod, OpCounter* ctr);

// --- canonical signed plaintext encoding, range (-n/2, n/2) ---
mpz_class signed_to_canonical(const PublicParams& pp, const mpz_class& m);
mpz_class canonical_to_signed(const PublicParams& pp, const mpz_class& v);

// --- primality / key generation ---
bool miller_rabin(const mpz_class& n, int rounds, Rng& rng);
// Safe prime p = 2p' + 1 with exactly `bits` bits and the top two bits set,
// so products of two such primes have full bit length.
mpz_class gen_safe_prime(unsigned bits, Rng& rng, uint64_t max_candidates);

struct KeyPair {
    PublicParams pp;
    MasterKey mk;
};

KeyPair keygen(unsigned kappa, Rng& rng, uint64_t max_candidates = 8'000'000);
// Builds key material from pinned factors; mu and x still come from the rng.
KeyPair keygen_from_primes(const mpz_class& p, const mpz_class& q, Rng& rng);
// Fully pinned variant for frozen-value tests.
KeyPair keygen_explicit(const mpz_class& p, const mpz_class& q, const mpz_class& mu,
                        const mpz_class& x);
// Toy instance on (p, q) = (23, 47).
KeyPair keygen_toy(Rng& rng);

KeyShares split_key(const MasterKey& mk, Rng& rng);

// --- pair-ciphertext operations ---
PairCiphertext encrypt(const PublicParams& pp, const mpz_class& m, Rng& rng,
                       OpCounter* ctr = nullptr);
PairCiphertext encrypt_with_r(const PublicParams& pp, const mpz_class& m, const mpz_class& r,
                              OpCounter* ctr = nullptr);
mpz_class decrypt(const PublicParams& pp, const MasterKey& mk, const PairCiphertext& ct,
                  OpCounter* ctr = nullptr);
PairCiphertext partial_decrypt(const PublicParams& pp, const mpz_class& share,
                               const PairCiphertext& ct, OpCounter* ctr = nullptr);
// Final decode once every share has been applied: ((c2 - 1) / n), signed.
mpz_class pair_decode(const PublicParams& pp, const PairCiphertext& ct);

// --- key material (de)serialization, canonical byte layout ---
struct KeyBundle {
    PublicParams pp;
    MasterKey mk;
    KeyShares shares;
};

std::vector<uint8_t> serialize_bundle(const KeyBundle& kb);
KeyBundle deserialize_bundle(const std::vector<uint8_t>& bytes);
void save_bundle(const KeyBundle& kb, const std::string& path);
KeyBundle load_bundle(const std::string& path);

}  // namespace lptd

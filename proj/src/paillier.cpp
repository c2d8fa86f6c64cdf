#include "lptd/paillier.hpp"

#include <fstream>
#include <vector>

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"

namespace lptd {

namespace {

constexpr int kMillerRabinRounds = 64;
constexpr unsigned kSieveBound = 8192;

const std::vector<unsigned long>& small_primes() {
    static const std::vector<unsigned long> primes = [] {
        std::vector<bool> sieve(kSieveBound, true);
        std::vector<unsigned long> out;
        for (unsigned long i = 2; i < kSieveBound; ++i) {
            if (!sieve[i]) continue;
            out.push_back(i);
            for (unsigned long j = i * i; j < kSieveBound; j += i) sieve[j] = false;
        }
        return out;
    }();
    return primes;
}

}  // namespace

mpz_class mulmod(const mpz_class& a, const mpz_class& b, const mpz_class& mod, OpCounter* ctr) {
    count_mul(ctr);
    mpz_class r = a * b;
    r %= mod;
    if (r < 0) r += mod;
    return r;
}

mpz_class powmod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod, OpCounter* ctr) {
    count_exp(ctr);
    mpz_class r;
    mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
    return r;
}

mpz_class invmod(const mpz_class& a, const mpz_class& mod, OpCounter* ctr) {
    count_inv(ctr);
    mpz_class r;
    if (mpz_invert(r.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()) == 0)
        raise(Errc::malformed_ciphertext, "element not invertible");
    return r;
}

mpz_class signed_to_canonical(const PublicParams& pp, const mpz_class& m) {
    mpz_class mag = abs(m);
    if (2 * mag >= pp.n) raise(Errc::range_error, "plaintext magnitude exceeds n/2");
    if (m >= 0) return m;
    return pp.n + m;
}

mpz_class canonical_to_signed(const PublicParams& pp, const mpz_class& v) {
    if (v < 0 || v >= pp.n) raise(Errc::range_error, "canonical value out of [0, n)");
    if (2 * v > pp.n) return v - pp.n;
    return v;
}

bool miller_rabin(const mpz_class& n, int rounds, Rng& rng) {
    if (n < 2) return false;
    for (unsigned long sp : small_primes()) {
        if (n == sp) return true;
        if (mpz_divisible_ui_p(n.get_mpz_t(), sp)) return false;
        if (mpz_cmp_ui(n.get_mpz_t(), sp * sp) < 0) return true;
    }
    // n - 1 = d * 2^s with d odd
    mpz_class nm1 = n - 1;
    mpz_class d = nm1;
    unsigned long s = 0;
    while (mpz_even_p(d.get_mpz_t())) {
        d >>= 1;
        ++s;
    }
    mpz_class span = n - 3;  // witnesses in [2, n-2]
    for (int i = 0; i < rounds; ++i) {
        mpz_class a = rng.below(span) + 2;
        mpz_class y = powmod(a, d, n, nullptr);
        if (y == 1 || y == nm1) continue;
        bool composite = true;
        for (unsigned long j = 1; j < s; ++j) {
            y = mulmod(y, y, n, nullptr);
            if (y == nm1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

mpz_class gen_safe_prime(unsigned bits, Rng& rng, uint64_t max_candidates) {
    if (bits < 4) raise(Errc::range_error, "safe prime bit length too small");
    const auto& primes = small_primes();
    for (uint64_t iter = 0; iter < max_candidates; ++iter) {
        // p' with top two bits set (keeps n = pq at full width) and odd.
        mpz_class sophie = rng.bits(bits - 1);
        mpz_setbit(sophie.get_mpz_t(), bits - 2);
        if (bits >= 4) mpz_setbit(sophie.get_mpz_t(), bits - 3);
        mpz_setbit(sophie.get_mpz_t(), 0);

        // Joint sieve: reject when r | p' or r | 2p'+1 (p' = (r-1)/2 mod r).
        bool sieved_out = false;
        for (unsigned long r : primes) {
            if (r < 3) continue;
            if (mpz_cmp_ui(sophie.get_mpz_t(), r) <= 0) break;
            unsigned long rem = mpz_fdiv_ui(sophie.get_mpz_t(), r);
            if (rem == 0 || rem == (r - 1) / 2) {
                sieved_out = true;
                break;
            }
        }
        if (sieved_out) continue;

        if (!miller_rabin(sophie, 1, rng)) continue;
        mpz_class p = 2 * sophie + 1;
        if (!miller_rabin(p, kMillerRabinRounds, rng)) continue;
        if (!miller_rabin(sophie, kMillerRabinRounds, rng)) continue;
        return p;
    }
    raise(Errc::generation_exhausted, "no safe prime found within candidate budget");
}

KeyPair keygen(unsigned kappa, Rng& rng, uint64_t max_candidates) {
    if (kappa < 16) raise(Errc::range_error, "kappa must be at least 16");
    mpz_class p = gen_safe_prime(kappa, rng, max_candidates);
    mpz_class q;
    do {
        q = gen_safe_prime(kappa, rng, max_candidates);
    } while (q == p);
    return keygen_from_primes(p, q, rng);
}

KeyPair keygen_from_primes(const mpz_class& p, const mpz_class& q, Rng& rng) {
    mpz_class n = p * q;
    mpz_class n_sq = n * n;
    mpz_class mu;
    do {
        mu = rng.below(n_sq);
    } while (mu == 0 || gcd(mu, n) != 1);
    mpz_class lambda = lcm(p - 1, q - 1);
    mpz_class x = rng.below(n * lambda / 2) + 1;  // uniform in [1, n*lambda/2]
    return keygen_explicit(p, q, mu, x);
}

KeyPair keygen_explicit(const mpz_class& p, const mpz_class& q, const mpz_class& mu,
                        const mpz_class& x) {
    KeyPair kp;
    kp.pp.n = p * q;
    kp.pp.n_sq = kp.pp.n * kp.pp.n;
    kp.pp.g = mulmod(mu, mu, kp.pp.n_sq, nullptr);
    kp.pp.kappa = static_cast<unsigned>(mpz_sizeinbase(p.get_mpz_t(), 2));
    kp.mk.p = p;
    kp.mk.q = q;
    kp.mk.p_prime = (p - 1) / 2;
    kp.mk.q_prime = (q - 1) / 2;
    kp.mk.lambda = lcm(p - 1, q - 1);
    kp.mk.x = x;
    kp.pp.h = powmod(kp.pp.g, x, kp.pp.n_sq, nullptr);
    return kp;
}

KeyPair keygen_toy(Rng& rng) { return keygen_from_primes(23, 47, rng); }

KeyShares split_key(const MasterKey& mk, Rng& rng) {
    if (mk.x < 2) raise(Errc::cannot_split, "secret exponent too small to split");
    KeyShares ks;
    ks.x1 = rng.below(mk.x - 1) + 1;  // uniform in [1, x-1]
    ks.x2 = mk.x - ks.x1;
    return ks;
}

PairCiphertext encrypt(const PublicParams& pp, const mpz_class& m, Rng& rng, OpCounter* ctr) {
    return encrypt_with_r(pp, m, rng.below(pp.n_sq), ctr);
}

PairCiphertext encrypt_with_r(const PublicParams& pp, const mpz_class& m, const mpz_class& r,
                              OpCounter* ctr) {
    mpz_class mc = signed_to_canonical(pp, m);
    PairCiphertext ct;
    ct.c1 = powmod(pp.g, r, pp.n_sq, ctr);
    mpz_class body = (1 + pp.n * mc) % pp.n_sq;
    ct.c2 = mulmod(powmod(pp.h, r, pp.n_sq, ctr), body, pp.n_sq, ctr);
    return ct;
}

mpz_class decrypt(const PublicParams& pp, const MasterKey& mk, const PairCiphertext& ct,
                  OpCounter* ctr) {
    return pair_decode(pp, partial_decrypt(pp, mk.x, ct, ctr));
}

PairCiphertext partial_decrypt(const PublicParams& pp, const mpz_class& share,
                               const PairCiphertext& ct, OpCounter* ctr) {
    PairCiphertext out;
    out.c1 = ct.c1;
    mpz_class denom = powmod(ct.c1, share, pp.n_sq, ctr);
    out.c2 = mulmod(ct.c2, invmod(denom, pp.n_sq, ctr), pp.n_sq, ctr);
    return out;
}

mpz_class pair_decode(const PublicParams& pp, const PairCiphertext& ct) {
    mpz_class u = ct.c2 - 1;
    if (u < 0 || !mpz_divisible_p(u.get_mpz_t(), pp.n.get_mpz_t()))
        raise(Errc::malformed_ciphertext, "decryption residue not divisible by n");
    return canonical_to_signed(pp, u / pp.n);
}

namespace {

constexpr uint32_t kBundleMagic = 0x4c505444;  // "LPTD"
constexpr uint8_t kBundleVersion = 1;

}  // namespace

std::vector<uint8_t> serialize_bundle(const KeyBundle& kb) {
    ByteWriter w;
    w.u32(kBundleMagic);
    w.u8(kBundleVersion);
    w.u32(kb.pp.kappa);
    w.mpz_lp(kb.pp.n);
    w.mpz_lp(kb.pp.g);
    w.mpz_lp(kb.pp.h);
    w.mpz_lp(kb.mk.x);
    w.mpz_lp(kb.mk.lambda);
    w.mpz_lp(kb.mk.p);
    w.mpz_lp(kb.mk.q);
    w.mpz_lp(kb.mk.p_prime);
    w.mpz_lp(kb.mk.q_prime);
    w.mpz_lp(kb.shares.x1);
    w.mpz_lp(kb.shares.x2);
    return w.data();
}

KeyBundle deserialize_bundle(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.u32() != kBundleMagic) raise(Errc::io_error, "bad key bundle magic");
    if (r.u8() != kBundleVersion) raise(Errc::io_error, "unsupported key bundle version");
    KeyBundle kb;
    kb.pp.kappa = r.u32();
    kb.pp.n = r.mpz_lp();
    kb.pp.n_sq = kb.pp.n * kb.pp.n;
    kb.pp.g = r.mpz_lp();
    kb.pp.h = r.mpz_lp();
    kb.mk.x = r.mpz_lp();
    kb.mk.lambda = r.mpz_lp();
    kb.mk.p = r.mpz_lp();
    kb.mk.q = r.mpz_lp();
    kb.mk.p_prime = r.mpz_lp();
    kb.mk.q_prime = r.mpz_lp();
    kb.shares.x1 = r.mpz_lp();
    kb.shares.x2 = r.mpz_lp();
    if (!r.at_end()) raise(Errc::io_error, "trailing bytes in key bundle");
    return kb;
}

void save_bundle(const KeyBundle& kb, const std::string& path) {
    auto bytes = serialize_bundle(kb);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) raise(Errc::io_error, "cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) raise(Errc::io_error, "write failed: " + path);
}

KeyBundle load_bundle(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(Errc::io_error, "cannot open for reading: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_bundle(bytes);
}

}  // namespace lptd

#pragma once

#include <atomic>
#include <cstdint>

namespace lptd {

// Tally of the operations the cost model cares about. Crypto functions take
// an optional pointer; entities own one counter each and the simulator
// snapshots them per phase. Atomic so concurrent callers may share one.
struct OpCounter {
    std::atomic<uint64_t> modmul{0};
    std::atomic<uint64_t> modexp{0};
    std::atomic<uint64_t> modinv{0};
    std::atomic<uint64_t> hash{0};

    void reset() {
        modmul = 0;
        modexp = 0;
        modinv = 0;
        hash = 0;
    }
};

struct OpSnapshot {
    uint64_t modmul = 0;
    uint64_t modexp = 0;
    uint64_t modinv = 0;
    uint64_t hash = 0;

    OpSnapshot& operator+=(const OpSnapshot& o) {
        modmul += o.modmul;
        modexp += o.modexp;
        modinv += o.modinv;
        hash += o.hash;
        return *this;
    }
    OpSnapshot operator-(const OpSnapshot& o) const {
        return {modmul - o.modmul, modexp - o.modexp, modinv - o.modinv, hash - o.hash};
    }
    bool operator==(const OpSnapshot&) const = default;
};

inline OpSnapshot snapshot(const OpCounter& c) {
    return {c.modmul.load(), c.modexp.load(), c.modinv.load(), c.hash.load()};
}

inline void count_mul(OpCounter* c, uint64_t k = 1) {
    if (c) c->modmul.fetch_add(k, std::memory_order_relaxed);
}
inline void count_exp(OpCounter* c, uint64_t k = 1) {
    if (c) c->modexp.fetch_add(k, std::memory_order_relaxed);
}
inline void count_inv(OpCounter* c, uint64_t k = 1) {
    if (c) c->modinv.fetch_add(k, std::memory_order_relaxed);
}
inline void count_hash(OpCounter* c, uint64_t k = 1) {
    if (c) c->hash.fetch_add(k, std::memory_order_relaxed);
}

}  // namespace lptd

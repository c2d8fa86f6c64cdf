#include "lptd/hashchain.hpp"

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"

namespace lptd {

namespace {

void put_hash(ByteWriter& w, const HashVal& h) {
    w.u32(static_cast<uint32_t>(h.size()));
    w.raw(h.data(), h.size());
}

}  // namespace

HashVal chain_hash(const HashVal& next, uint64_t index, OpCounter* ctr) {
    ByteWriter w;
    put_hash(w, next);
    w.u64(index);
    count_hash(ctr);
    return sha256(w.data());
}

HashChain gen_chain(const HashVal& seed, size_t length, OpCounter* ctr) {
    if (length == 0) raise(Errc::invalid_length, "hash chain needs at least one node");
    HashChain hc;
    hc.nodes.resize(length + 1);
    hc.nodes[length] = seed;
    for (size_t j = length; j-- > 0;) hc.nodes[j] = chain_hash(hc.nodes[j + 1], j, ctr);
    return hc;
}

HashChain gen_chain(Rng& rng, size_t length, OpCounter* ctr) {
    HashVal seed;
    for (size_t i = 0; i < seed.size(); i += 8) {
        uint64_t v = rng.next_u64();
        for (int b = 0; b < 8; ++b) seed[i + b] = static_cast<uint8_t>(v >> (8 * b));
    }
    return gen_chain(seed, length, ctr);
}

bool ChainVerifier::submit(const HashVal& candidate, uint64_t position, OpCounter* ctr) {
    if (position <= last_position_) return false;
    uint64_t gap = position - last_position_ - 1;
    if (gap > max_gap_) return false;
    HashVal v = candidate;
    for (uint64_t t = position; t-- > last_position_;) v = chain_hash(v, t, ctr);
    if (v != last_accepted_) return false;
    last_accepted_ = candidate;
    last_position_ = position;
    return true;
}

HashVal mac_device(const std::vector<uint8_t>& payload, const HashVal& chain_node, OpCounter* ctr) {
    ByteWriter w;
    w.bytes_lp(payload);
    put_hash(w, chain_node);
    count_hash(ctr);
    return sha256(w.data());
}

bool mac_device_check(const std::vector<uint8_t>& payload, const HashVal& chain_node,
                      const HashVal& mac, OpCounter* ctr) {
    return mac_device(payload, chain_node, ctr) == mac;
}

HashVal mac_server(const std::vector<uint8_t>& payload, uint64_t iteration, const SharedKey& ss,
                   OpCounter* ctr) {
    ByteWriter w;
    w.bytes_lp(payload);
    w.u64(iteration);
    w.bytes_lp(ss);
    count_hash(ctr);
    return sha256(w.data());
}

bool mac_server_check(const std::vector<uint8_t>& payload, uint64_t iteration, const SharedKey& ss,
                      const HashVal& mac, OpCounter* ctr) {
    return mac_server(payload, iteration, ss, ctr) == mac;
}

}  // namespace lptd

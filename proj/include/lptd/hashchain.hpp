#pragma once

#include <cstdint>
#include <vector>

#include "lptd/opcount.hpp"
#include "lptd/rng.hpp"
#include "lptd/sha256.hpp"

namespace lptd {

// One-way hash chain: nodes[length] is the random seed and
// nodes[j] = H(nodes[j+1] || j). Nodes are revealed in index order, one per
// authenticated report; the verifier holds nodes[0].
struct HashChain {
    std::vector<HashVal> nodes;  // size length + 1

    size_t length() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    const HashVal& head() const { return nodes.front(); }
    const HashVal& node(size_t j) const { return nodes.at(j); }
};

HashVal chain_hash(const HashVal& next, uint64_t index, OpCounter* ctr = nullptr);

HashChain gen_chain(const HashVal& seed, size_t length, OpCounter* ctr = nullptr);
HashChain gen_chain(Rng& rng, size_t length, OpCounter* ctr = nullptr);

// Stateful, single-writer verifier. With max_gap = 0 only the successor
// position is accepted; a positive max_gap lets a sender that skipped
// positions re-join by hashing the candidate down across the gap.
class ChainVerifier {
public:
    ChainVerifier() = default;
    ChainVerifier(const HashVal& head, size_t max_gap = 0)
        : last_accepted_(head), max_gap_(max_gap) {}

    bool submit(const HashVal& candidate, uint64_t position, OpCounter* ctr = nullptr);

    uint64_t last_position() const { return last_position_; }
    const HashVal& last_accepted() const { return last_accepted_; }

private:
    HashVal last_accepted_{};
    uint64_t last_position_ = 0;
    size_t max_gap_ = 0;
};

// Report tags. Device reports bind to the chain node revealed alongside;
// fog-to-cloud reports bind to the shared key and the iteration index.
using SharedKey = std::vector<uint8_t>;

HashVal mac_device(const std::vector<uint8_t>& payload, const HashVal& chain_node,
                   OpCounter* ctr = nullptr);
bool mac_device_check(const std::vector<uint8_t>& payload, const HashVal& chain_node,
                      const HashVal& mac, OpCounter* ctr = nullptr);

HashVal mac_server(const std::vector<uint8_t>& payload, uint64_t iteration, const SharedKey& ss,
                   OpCounter* ctr = nullptr);
bool mac_server_check(const std::vector<uint8_t>& payload, uint64_t iteration, const SharedKey& ss,
                      const HashVal& mac, OpCounter* ctr = nullptr);

}  // namespace lptd

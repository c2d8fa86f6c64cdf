#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lptd/fixedpoint.hpp"
#include "lptd/hashchain.hpp"
#include "lptd/masking.hpp"
#include "lptd/opcount.hpp"
#include "lptd/paillier.hpp"
#include "lptd/rng.hpp"

namespace lptd {

enum class Mode { lptd1, lptd2 };
enum class Blinding { debias, paper_literal };

enum class Phase : uint8_t { setup = 0, std_a = 1, std_b = 2, weight = 3, truth = 4 };
constexpr size_t kNumPhases = 5;
const char* phase_name(Phase p);

struct ProtocolConfig {
    size_t devices = 0;     // K
    size_t objects = 0;     // M
    size_t iterations = 0;  // w
    Mode mode = Mode::lptd1;
    Blinding blinding = Blinding::debias;
    int64_t r_min = 2;
    int64_t r_max = 65536;
    int64_t scale_obs = 10'000;
    int64_t scale_wt = 1'000'000;
    // |x| bound assumed by the overflow guard; must dominate the data.
    double data_abs_bound = 0.0;
    // lptd2: TA ships the per-slot g-powers to the fog at setup so device
    // reports shrink back to the lptd1 shape.
    bool g_preprovisioned = false;
};

// Maps report components to mask-vector indices. lptd1 gives every masked
// ciphertext its own exponent; lptd2 shares one exponent per report so a
// single g^s companion can recover every component of an aggregate.
class SlotLayout {
public:
    SlotLayout() = default;
    SlotLayout(Mode mode, size_t objects, size_t iterations);

    size_t std_a_slot(size_t object) const;
    size_t std_b_slot(size_t object) const;
    size_t weight_slot(size_t iteration) const;                    // iterations 1-based
    size_t truth_slot(size_t iteration, size_t component) const;   // components 0..M, M = weight
    size_t total_slots() const { return total_; }

    // Chain positions: two authenticated reports per iteration.
    static uint64_t weight_chain_position(size_t iteration) { return 2 * iteration - 1; }
    static uint64_t truth_chain_position(size_t iteration) { return 2 * iteration; }

private:
    Mode mode_ = Mode::lptd1;
    size_t objects_ = 0;
    size_t iterations_ = 0;
    size_t total_ = 0;
};

struct MaskPair {
    mpz_class h_pow;
    std::optional<mpz_class> g_pow;
};

struct DeviceKit {
    size_t id = 0;  // 0-based
    PublicParams pp;
    FixedPointCodec codec;
    std::vector<MaskPair> masks;  // indexed by slot
    HashChain chain;              // length 2w
};

struct FogKit {
    PublicParams pp;
    FixedPointCodec codec;
    mpz_class x1;
    std::vector<HashVal> chain_heads;  // per device
    std::vector<MaskPair> masks;       // server mask vector S_{K+1}
    SharedKey ss;
    // g_preprovisioned: [device][slot] -> g^{s_{k,slot}}
    std::vector<std::vector<mpz_class>> device_g_powers;
};

struct CloudKit {
    PublicParams pp;
    FixedPointCodec codec;
    mpz_class x2;
    std::vector<MaskPair> masks;  // server mask vector S_0
    SharedKey ss;
};

struct SetupBundle {
    ProtocolConfig cfg;
    SlotLayout layout;
    std::vector<DeviceKit> devices;
    FogKit fog;
    CloudKit cloud;
    uint64_t preprovisioned_bits = 0;  // G material shipped at setup
};

// System initialization: key split, mask-share vectors with per-slot
// cancellation, hash chains, shared fog/cloud key. Throws config-error when
// the plaintext overflow guard fails.
SetupBundle ta_setup(const ProtocolConfig& cfg, const KeyPair& kp, Rng& rng,
                     OpCounter* ctr = nullptr);

// --- wire records ---

struct DeviceReport {
    size_t device = 0;
    Phase phase = Phase::weight;
    size_t iteration = 0;  // 0 for std rounds
    std::vector<mpz_class> cts;
    std::optional<mpz_class> g_companion;
    std::optional<HashVal> chain_node;
    uint64_t chain_position = 0;
    std::optional<HashVal> mac;

    std::vector<uint8_t> payload_bytes() const;
    uint64_t table2_components() const { return cts.size() + (g_companion ? 1 : 0); }
};

struct FogAggregate {
    Phase phase = Phase::weight;
    size_t iteration = 0;
    std::vector<mpz_class> cts;        // one per component slot
    std::optional<mpz_class> g_agg;    // recovery path
    bool recovered = false;            // cts hold C_{t,1} = C / (G)^{x1}
    std::vector<size_t> present;       // device ids folded into the aggregate
    HashVal mac{};

    std::vector<uint8_t> payload_bytes() const;
};

struct BlindedSum {
    size_t iteration = 0;
    int64_t units = 0;  // fixed-point log at weight scale
};

struct DebiasShare {
    size_t iteration = 0;
    int64_t r2 = 0;
};

struct Rejection {
    size_t device = 0;
    size_t iteration = 0;
    Phase phase = Phase::weight;
    std::string reason;  // "chain" | "mac"
};

// --- entities ---

class Device {
public:
    Device(DeviceKit kit, std::vector<double> observations, const ProtocolConfig& cfg,
           const SlotLayout& layout, OpCounter* ctr = nullptr);

    DeviceReport std_a_report();
    void on_mean_broadcast(const std::vector<double>& means);
    DeviceReport std_b_report();
    void on_std_broadcast(const std::vector<double>& stds);

    void on_truth_broadcast(const std::vector<double>& truths);
    DeviceReport weight_report(size_t iteration);
    void on_blinded_sum(const BlindedSum& b);
    DeviceReport truth_report(size_t iteration);

    size_t id() const { return kit_.id; }
    int64_t dist_units() const { return dist_units_; }
    int64_t blinded_weight_units() const { return w_blind_units_; }
    const std::vector<double>& observations() const { return obs_; }

private:
    const MaskPair& take_mask(size_t slot);
    const HashVal& take_chain_node(uint64_t position);
    DeviceReport finish_authenticated(DeviceReport rep, uint64_t position);

    DeviceKit kit_;
    std::vector<double> obs_;
    std::vector<int64_t> obs_units_;
    ProtocolConfig cfg_;
    SlotLayout layout_;
    OpCounter* ctr_ = nullptr;

    std::vector<bool> mask_used_;
    uint64_t chain_cursor_ = 0;  // last revealed position

    std::vector<double> mean_;
    std::vector<double> std_;
    std::vector<double> truths_;
    int64_t dist_units_ = 0;
    size_t dist_iteration_ = 0;
    int64_t w_blind_units_ = 0;
    size_t weight_iteration_ = 0;
};

struct FogVerdict {
    std::vector<DeviceReport> accepted;
    std::vector<Rejection> rejected;
    std::vector<size_t> present;  // sorted accepted device ids
};

class Fog {
public:
    Fog(FogKit kit, const ProtocolConfig& cfg, const SlotLayout& layout, Rng rng,
        OpCounter* ctr = nullptr);

    // Chain + MAC screening for authenticated phases; std rounds pass through.
    FogVerdict verify(Phase phase, size_t iteration, const std::vector<DeviceReport>& reports);

    // Mask-cancellation aggregation with the fog's own mask folded in. Used
    // when every device reported (and always in lptd1 mode).
    FogAggregate aggregate(Phase phase, size_t iteration, const std::vector<DeviceReport>& accepted);
    // lptd2 fault path: no server masks, aggregate the g-companions and
    // apply the x1 half of the split key.
    FogAggregate aggregate_recovery(Phase phase, size_t iteration,
                                    const std::vector<DeviceReport>& accepted);
    // Picks between the two based on mode and the present set.
    FogAggregate process(Phase phase, size_t iteration, const FogVerdict& verdict);

    BlindedSum reblind(const BlindedSum& from_cloud);
    DebiasShare debias_share(size_t iteration) const;

    uint64_t verifier_position(size_t device) const;

private:
    mpz_class g_power_for(const DeviceReport& rep, size_t slot) const;

    FogKit kit_;
    ProtocolConfig cfg_;
    SlotLayout layout_;
    Rng rng_;
    OpCounter* ctr_ = nullptr;
    std::vector<ChainVerifier> verifiers_;
    int64_t last_r2_ = 1;
    size_t last_r2_iteration_ = 0;
};

class Cloud {
public:
    Cloud(CloudKit kit, const ProtocolConfig& cfg, const SlotLayout& layout, Rng rng,
          std::vector<double> initial_truths, OpCounter* ctr = nullptr);

    std::vector<double> on_std_a(const FogAggregate& agg);  // mean broadcast
    std::vector<double> on_std_b(const FogAggregate& agg);  // std broadcast

    const std::vector<double>& truths() const { return truths_; }
    BlindedSum on_weight_aggregate(const FogAggregate& agg);
    // Returns updated truths; `debias` must be present in debias mode.
    const std::vector<double>& on_truth_aggregate(const FogAggregate& agg,
                                                  const std::optional<DebiasShare>& debias);

    bool last_round_biased() const { return last_round_biased_; }
    int64_t last_r1() const { return last_r1_; }
    const std::vector<mpz_class>& observation_sums() const { return sx_units_; }

private:
    void check_mac(const FogAggregate& agg);
    std::vector<mpz_class> decode_batch(const FogAggregate& agg);

    CloudKit kit_;
    ProtocolConfig cfg_;
    SlotLayout layout_;
    Rng rng_;
    OpCounter* ctr_ = nullptr;

    std::vector<double> truths_;
    std::vector<mpz_class> sx_units_;    // per-object observation sums (std round A)
    std::vector<size_t> std_present_;    // devices behind sx_units_
    int64_t last_r1_ = 1;
    int64_t blinded_units_sent_ = 0;  // log(r1 * sum) units, pre fog re-blind
    int64_t log_sum_units_ = 0;       // log(sum) units, for exact debias
    bool last_round_biased_ = false;
};

// Shared truth initializer: uniform in the per-object observation envelope.
std::vector<double> initial_truths(const std::vector<std::vector<double>>& obs, Rng& rng);

}  // namespace lptd

#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lptd/opcount.hpp"
#include "lptd/protocol.hpp"
#include "lptd/truth.hpp"

namespace lptd {

// --- scenario description ---

struct FaultSpec {
    size_t device = 0;
    bool whole_run = false;             // silent everywhere, std rounds included
    std::vector<size_t> iterations;     // 1-based; used when !whole_run
};

enum class AttackKind { replay, tamper, inject };
const char* attack_kind_name(AttackKind k);

struct AttackSpec {
    AttackKind kind = AttackKind::replay;
    size_t device = 0;
    size_t iteration = 1;
    Phase phase = Phase::weight;  // weight or truth
};

struct DataSpec {
    enum class Model { gaussian, explicit_matrix };
    Model model = Model::gaussian;
    double truth_low = 0.0;
    double truth_high = 10.0;
    double sigma_default = 1.0;
    std::vector<double> sigma;  // optional per-device override
    std::optional<size_t> noise_free_device;
    std::vector<std::vector<double>> observations;  // explicit model
};

struct ScenarioConfig {
    std::string name = "scenario";
    uint64_t seed = 1;
    size_t devices = 0;
    size_t objects = 0;
    size_t iterations = 10;
    unsigned kappa = 128;
    Mode mode = Mode::lptd1;
    Blinding blinding = Blinding::debias;
    int64_t r_min = 2;
    int64_t r_max = 65536;
    int64_t scale_obs = 10'000;
    int64_t scale_wt = 1'000'000;
    DataSpec data;
    std::vector<FaultSpec> faults;
    std::vector<AttackSpec> attacks;
    bool g_preprovisioned = false;
    bool oracle_comparison = true;
};

// --- run products ---

struct Message {
    enum class Kind {
        device_report,
        fog_aggregate,
        blinded_sum,
        debias_share,
        truth_broadcast,
        mean_broadcast,
        std_broadcast,
    };
    Kind kind = Kind::device_report;
    std::string sender;
    std::string receiver;
    Phase phase = Phase::setup;
    size_t iteration = 0;
    uint64_t table2_bits = 0;  // ciphertext components x U, device uplink only
    uint64_t bytes = 0;        // canonical serialized size
    bool adversarial = false;
    std::variant<std::monostate, DeviceReport, FogAggregate, BlindedSum, DebiasShare,
                 std::vector<double>>
        payload;
};

struct UplinkAccount {
    uint64_t bits = 0;
    uint64_t reports = 0;
};

struct IterationStats {
    OpSnapshot ops;  // every entity, this iteration only
    uint64_t device_uplink_bits = 0;
    size_t rejections = 0;
    size_t recoveries = 0;
};

struct RunMetrics {
    bool completed = false;
    std::string error;       // populated when !completed
    std::string error_code;  // errc slug
    size_t iterations_done = 0;
    uint64_t u_bits = 0;  // bit-length(n^2)

    std::vector<std::array<UplinkAccount, kNumPhases>> device_uplink;  // [device][phase]
    std::array<uint64_t, kNumPhases> bytes_from_devices{};
    std::array<uint64_t, kNumPhases> bytes_from_fog{};
    std::array<uint64_t, kNumPhases> bytes_from_cloud{};
    uint64_t preprovisioned_bits = 0;

    std::vector<Rejection> rejections;
    std::vector<std::string> recovered_aggregates;  // "phase:iteration"
    std::vector<size_t> biased_iterations;          // debias fallback rounds
    std::vector<IterationStats> per_iteration;

    std::vector<std::vector<double>> truth_trace;  // per iteration
    std::vector<double> final_blinded_weights;     // per device, weight-scale reals

    OpSnapshot ops_ta, ops_fog, ops_cloud, ops_devices;
    uint64_t max_device_modexp_per_iteration = 0;
    uint64_t max_device_modmul_per_iteration = 0;

    bool oracle_compared = false;
    std::vector<double> oracle_max_dev;  // per iteration
    std::vector<double> oracle_rmse;     // per iteration
    std::vector<double> final_oracle_weights;
    std::vector<double> planted_rmse;  // per iteration, gaussian model only

    double wall_ms = 0;  // excluded from the canonical serialization
};

struct RunOutput {
    RunMetrics metrics;
    std::vector<Message> trace;
    std::vector<std::vector<double>> observations;
    std::vector<double> planted_truths;  // gaussian model only
    std::vector<double> init_truths;
    std::vector<HashChain> chains;  // for chain-discipline inspection
};

// Data generation is part of the deterministic run but exposed for the
// oracle-side tests.
std::vector<std::vector<double>> generate_observations(const ScenarioConfig& cfg,
                                                       std::vector<double>* planted_out = nullptr);
double scenario_data_bound(const ScenarioConfig& cfg);

RunOutput run_scenario_full(const ScenarioConfig& cfg,
                            const std::optional<KeyBundle>& keys = std::nullopt);
RunMetrics run_scenario(const ScenarioConfig& cfg,
                        const std::optional<KeyBundle>& keys = std::nullopt);

// Canonical (deterministic) serialization of the metrics; wall_ms excluded.
std::string metrics_to_json(const RunMetrics& m, int indent = -1);

// --- Table-2 closed forms ---

// Closed forms for the per-device uplink cost of one report, in bits.
uint64_t table2_weight_bits(Mode mode, bool g_preprovisioned, uint64_t u_bits);
uint64_t table2_truth_bits(Mode mode, bool g_preprovisioned, size_t objects, uint64_t u_bits);

struct AccountRow {
    Phase phase = Phase::weight;
    size_t device = 0;
    uint64_t expected_bits = 0;
    uint64_t measured_bits = 0;
    bool ok = false;
};

std::vector<AccountRow> account_bytes(const RunMetrics& m, const ScenarioConfig& cfg);
// Throws accounting-failure naming the first mismatch.
void assert_accounting(const RunMetrics& m, const ScenarioConfig& cfg);

// Structural checks over the message trace: report payloads reach only the
// fog, aggregates only the cloud, no per-device plaintext travels to either
// server, and chain nodes appear in strictly increasing position order.
void inspect_trace(const RunOutput& out, const ScenarioConfig& cfg);

}  // namespace lptd

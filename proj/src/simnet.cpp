#include "lptd/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"

namespace lptd {

using json = nlohmann::json;

const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::replay: return "replay";
        case AttackKind::tamper: return "tamper";
        case AttackKind::inject: return "inject";
    }
    return "?";
}

double scenario_data_bound(const ScenarioConfig& cfg) {
    if (cfg.data.model == DataSpec::Model::explicit_matrix) {
        double b = 1.0;
        for (const auto& row : cfg.data.observations)
            for (double v : row) b = std::max(b, std::fabs(v));
        return b + 1.0;
    }
    double sigma_max = cfg.data.sigma_default;
    for (double s : cfg.data.sigma) sigma_max = std::max(sigma_max, s);
    return std::max(std::fabs(cfg.data.truth_low), std::fabs(cfg.data.truth_high)) +
           8.0 * sigma_max + 1.0;
}

std::vector<std::vector<double>> generate_observations(const ScenarioConfig& cfg,
                                                       std::vector<double>* planted_out) {
    if (cfg.data.model == DataSpec::Model::explicit_matrix) {
        if (cfg.data.observations.size() != cfg.devices)
            raise(Errc::config_error, "explicit observations: row count != devices");
        for (const auto& row : cfg.data.observations)
            if (row.size() != cfg.objects)
                raise(Errc::config_error, "explicit observations: column count != objects");
        if (planted_out) planted_out->clear();
        return cfg.data.observations;
    }
    Rng rng = Rng(cfg.seed).fork("data");
    std::vector<double> planted(cfg.objects);
    for (auto& t : planted) t = rng.uniform(cfg.data.truth_low, cfg.data.truth_high);
    std::vector<double> sigma(cfg.devices, cfg.data.sigma_default);
    if (!cfg.data.sigma.empty()) {
        if (cfg.data.sigma.size() == 1)
            sigma.assign(cfg.devices, cfg.data.sigma[0]);
        else if (cfg.data.sigma.size() == cfg.devices)
            sigma = cfg.data.sigma;
        else
            raise(Errc::config_error, "sigma list must have one entry or one per device");
    }
    if (cfg.data.noise_free_device) {
        if (*cfg.data.noise_free_device >= cfg.devices)
            raise(Errc::config_error, "noise_free_device out of range");
        sigma[*cfg.data.noise_free_device] = 0.0;
    }
    std::vector<std::vector<double>> obs(cfg.devices, std::vector<double>(cfg.objects));
    for (size_t d = 0; d < cfg.devices; ++d)
        for (size_t m = 0; m < cfg.objects; ++m)
            obs[d][m] = sigma[d] == 0.0 ? planted[m] : rng.gaussian(planted[m], sigma[d]);
    if (planted_out) *planted_out = planted;
    return obs;
}

namespace {

size_t phase_idx(Phase p) { return static_cast<size_t>(p); }

struct Sim {
    const ScenarioConfig& cfg;
    RunOutput out;
    KeyPair kp;
    SetupBundle bundle;
    std::vector<std::unique_ptr<Device>> devices;
    std::unique_ptr<Fog> fog;
    std::unique_ptr<Cloud> cloud;
    std::vector<std::unique_ptr<OpCounter>> dev_ctr;
    OpCounter ta_ctr, fog_ctr, cloud_ctr;
    uint64_t u_bits = 0;
    Rng attack_rng;
    // honest reports of the previous rounds, replay source: [device][phase]
    std::vector<std::array<std::optional<DeviceReport>, kNumPhases>> prev_reports;

    explicit Sim(const ScenarioConfig& c) : cfg(c), attack_rng(Rng(c.seed).fork("attack")) {}

    bool silent(size_t device, Phase phase, size_t iteration) const {
        for (const auto& f : cfg.faults) {
            if (f.device != device) continue;
            if (f.whole_run) return true;
            if (phase == Phase::weight || phase == Phase::truth)
                if (std::find(f.iterations.begin(), f.iterations.end(), iteration) !=
                    f.iterations.end())
                    return true;
        }
        return false;
    }

    const AttackSpec* find_attack(AttackKind kind, size_t device, Phase phase,
                                  size_t iteration) const {
        for (const auto& a : cfg.attacks)
            if (a.kind == kind && a.device == device && a.phase == phase &&
                a.iteration == iteration)
                return &a;
        return nullptr;
    }

    void push_report(const DeviceReport& rep, bool adversarial) {
        Message msg;
        msg.kind = Message::Kind::device_report;
        msg.sender = (adversarial ? "adversary(device:" : "device:") +
                     std::to_string(rep.device) + (adversarial ? ")" : "");
        msg.receiver = "fog";
        msg.phase = rep.phase;
        msg.iteration = rep.iteration;
        msg.table2_bits = rep.table2_components() * u_bits;
        msg.bytes = rep.payload_bytes().size() + (rep.chain_node ? 32 : 0) + (rep.mac ? 32 : 0);
        msg.adversarial = adversarial;
        msg.payload = rep;
        out.trace.push_back(std::move(msg));
    }

    void push_aggregate(const FogAggregate& agg) {
        Message msg;
        msg.kind = Message::Kind::fog_aggregate;
        msg.sender = "fog";
        msg.receiver = "cloud";
        msg.phase = agg.phase;
        msg.iteration = agg.iteration;
        msg.bytes = agg.payload_bytes().size() + 32;
        msg.payload = agg;
        out.metrics.bytes_from_fog[phase_idx(agg.phase)] += msg.bytes;
        out.trace.push_back(std::move(msg));
    }

    void push_scalar_broadcast(Message::Kind kind, const std::string& sender,
                               const std::string& receiver, Phase phase, size_t iteration,
                               std::vector<double> values) {
        Message msg;
        msg.kind = kind;
        msg.sender = sender;
        msg.receiver = receiver;
        msg.phase = phase;
        msg.iteration = iteration;
        msg.bytes = 8 * values.size();
        msg.payload = std::move(values);
        auto& ledger = sender == "fog" ? out.metrics.bytes_from_fog : out.metrics.bytes_from_cloud;
        ledger[phase_idx(phase)] += msg.bytes;
        out.trace.push_back(std::move(msg));
    }

    DeviceReport make_report(size_t d, Phase phase, size_t iteration) {
        switch (phase) {
            case Phase::std_a: return devices[d]->std_a_report();
            case Phase::std_b: return devices[d]->std_b_report();
            case Phase::weight: return devices[d]->weight_report(iteration);
            case Phase::truth: return devices[d]->truth_report(iteration);
            default: raise(Errc::config_error, "phase has no device report");
        }
    }

    DeviceReport forge_report(size_t device, Phase phase, size_t iteration) {
        DeviceReport rep;
        rep.device = device;
        rep.phase = phase;
        rep.iteration = iteration;
        size_t comps = phase == Phase::weight ? 1 : cfg.objects + 1;
        for (size_t c = 0; c < comps; ++c) rep.cts.push_back(attack_rng.below(kp.pp.n_sq));
        if (cfg.mode == Mode::lptd2 && !cfg.g_preprovisioned)
            rep.g_companion = attack_rng.below(kp.pp.n_sq);
        HashVal node;
        for (size_t i = 0; i < node.size(); i += 8) {
            uint64_t v = attack_rng.next_u64();
            for (int b = 0; b < 8; ++b) node[i + b] = static_cast<uint8_t>(v >> (8 * b));
        }
        rep.chain_node = node;
        rep.chain_position = phase == Phase::weight ? SlotLayout::weight_chain_position(iteration)
                                                    : SlotLayout::truth_chain_position(iteration);
        // The tag is unkeyed, so the forger can compute a consistent one; only
        // the chain check stops this report.
        rep.mac = mac_device(rep.payload_bytes(), node);
        return rep;
    }

    std::vector<DeviceReport> collect(Phase phase, size_t iteration) {
        std::vector<DeviceReport> delivered;
        std::vector<std::pair<size_t, DeviceReport>> honest_this_round;
        for (size_t d = 0; d < cfg.devices; ++d) {
            if (silent(d, phase, iteration)) continue;
            DeviceReport rep = make_report(d, phase, iteration);
            auto& acct = out.metrics.device_uplink[d][phase_idx(phase)];
            acct.bits += rep.table2_components() * u_bits;
            acct.reports += 1;
            out.metrics.bytes_from_devices[phase_idx(phase)] +=
                rep.payload_bytes().size() + (rep.chain_node ? 64 : 0);
            honest_this_round.emplace_back(d, rep);

            if (const AttackSpec* a = find_attack(AttackKind::replay, d, phase, iteration)) {
                (void)a;
                const auto& stale = prev_reports[d][phase_idx(phase)];
                if (!stale) raise(Errc::config_error, "replay attack needs a prior report");
                push_report(*stale, true);
                delivered.push_back(*stale);
                continue;
            }
            if (find_attack(AttackKind::tamper, d, phase, iteration)) {
                DeviceReport evil = rep;
                size_t bit = static_cast<size_t>(attack_rng.uniform_int(
                    0, static_cast<int64_t>(mpz_sizeinbase(evil.cts[0].get_mpz_t(), 2)) - 1));
                mpz_combit(evil.cts[0].get_mpz_t(), bit);
                push_report(evil, true);
                delivered.push_back(evil);
                continue;
            }
            push_report(rep, false);
            delivered.push_back(rep);
        }
        for (const auto& a : cfg.attacks) {
            if (a.kind != AttackKind::inject || a.phase != phase || a.iteration != iteration)
                continue;
            DeviceReport forged = forge_report(a.device, phase, iteration);
            push_report(forged, true);
            delivered.push_back(forged);
        }
        for (auto& [d, rep] : honest_this_round) prev_reports[d][phase_idx(phase)] = std::move(rep);
        return delivered;
    }

    FogAggregate fog_round(Phase phase, size_t iteration) {
        auto delivered = collect(phase, iteration);
        FogVerdict verdict = fog->verify(phase, iteration, delivered);
        for (const auto& r : verdict.rejected) out.metrics.rejections.push_back(r);
        FogAggregate agg = fog->process(phase, iteration, verdict);
        if (agg.recovered)
            out.metrics.recovered_aggregates.push_back(std::string(phase_name(phase)) + ":" +
                                                       std::to_string(iteration));
        push_aggregate(agg);
        return agg;
    }

    void run_std_subprotocol() {
        FogAggregate a = fog_round(Phase::std_a, 0);
        auto means = cloud->on_std_a(a);
        push_scalar_broadcast(Message::Kind::mean_broadcast, "cloud", "devices", Phase::std_a, 0,
                              means);
        for (size_t d = 0; d < cfg.devices; ++d)
            if (!silent(d, Phase::std_a, 0)) devices[d]->on_mean_broadcast(means);

        FogAggregate b = fog_round(Phase::std_b, 0);
        auto stds = cloud->on_std_b(b);
        push_scalar_broadcast(Message::Kind::std_broadcast, "cloud", "devices", Phase::std_b, 0,
                              stds);
        for (size_t d = 0; d < cfg.devices; ++d)
            if (!silent(d, Phase::std_b, 0)) devices[d]->on_std_broadcast(stds);
    }

    void run_iteration(size_t j) {
        // W1: current truths out to every device.
        push_scalar_broadcast(Message::Kind::truth_broadcast, "cloud", "devices", Phase::weight, j,
                              cloud->truths());
        for (size_t d = 0; d < cfg.devices; ++d)
            if (!silent(d, Phase::weight, j) || !silent(d, Phase::truth, j))
                devices[d]->on_truth_broadcast(cloud->truths());

        // W2-W4: reports, aggregation, blinded distance sum.
        FogAggregate wagg = fog_round(Phase::weight, j);
        BlindedSum b1 = cloud->on_weight_aggregate(wagg);
        {
            Message msg;
            msg.kind = Message::Kind::blinded_sum;
            msg.sender = "cloud";
            msg.receiver = "fog";
            msg.phase = Phase::weight;
            msg.iteration = j;
            msg.bytes = 16;
            msg.payload = b1;
            out.metrics.bytes_from_cloud[phase_idx(Phase::weight)] += msg.bytes;
            out.trace.push_back(std::move(msg));
        }
        // W5: fog re-blind, broadcast to devices.
        BlindedSum b2 = fog->reblind(b1);
        {
            Message msg;
            msg.kind = Message::Kind::blinded_sum;
            msg.sender = "fog";
            msg.receiver = "devices";
            msg.phase = Phase::weight;
            msg.iteration = j;
            msg.bytes = 16;
            msg.payload = b2;
            out.metrics.bytes_from_fog[phase_idx(Phase::weight)] += msg.bytes;
            out.trace.push_back(std::move(msg));
        }
        for (size_t d = 0; d < cfg.devices; ++d)
            if (!silent(d, Phase::weight, j)) devices[d]->on_blinded_sum(b2);

        // T1-T3: weighted reports, aggregation, truth update.
        FogAggregate tagg = fog_round(Phase::truth, j);
        std::optional<DebiasShare> share;
        if (cfg.blinding == Blinding::debias) {
            share = fog->debias_share(j);
            Message msg;
            msg.kind = Message::Kind::debias_share;
            msg.sender = "fog";
            msg.receiver = "cloud";
            msg.phase = Phase::truth;
            msg.iteration = j;
            msg.bytes = 16;
            msg.payload = *share;
            out.metrics.bytes_from_fog[phase_idx(Phase::truth)] += msg.bytes;
            out.trace.push_back(std::move(msg));
        }
        const auto& truths = cloud->on_truth_aggregate(tagg, share);
        if (cloud->last_round_biased()) out.metrics.biased_iterations.push_back(j);
        out.metrics.truth_trace.push_back(truths);
        out.metrics.iterations_done = j;
    }
};

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

double max_abs_dev(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc = std::max(acc, std::fabs(a[i] - b[i]));
    return acc;
}

}  // namespace

RunOutput run_scenario_full(const ScenarioConfig& cfg, const std::optional<KeyBundle>& keys) {
    if (cfg.devices < 1 || cfg.objects < 1 || cfg.iterations < 1)
        raise(Errc::config_error, "devices, objects and iterations must all be at least 1");

    auto t0 = std::chrono::steady_clock::now();
    Sim sim(cfg);
    RunMetrics& m = sim.out.metrics;
    m.device_uplink.assign(cfg.devices, {});
    sim.prev_reports.resize(cfg.devices);

    Rng key_rng = Rng(cfg.seed).fork("keys");
    if (keys) {
        sim.kp.pp = keys->pp;
        sim.kp.mk = keys->mk;
    } else if (cfg.kappa == 16) {
        sim.kp = keygen_toy(key_rng);
    } else {
        sim.kp = keygen(cfg.kappa, key_rng);
    }
    sim.u_bits = mpz_sizeinbase(sim.kp.pp.n_sq.get_mpz_t(), 2);
    m.u_bits = sim.u_bits;

    ProtocolConfig pc;
    pc.devices = cfg.devices;
    pc.objects = cfg.objects;
    pc.iterations = cfg.iterations;
    pc.mode = cfg.mode;
    pc.blinding = cfg.blinding;
    pc.r_min = cfg.r_min;
    pc.r_max = cfg.r_max;
    pc.scale_obs = cfg.scale_obs;
    pc.scale_wt = cfg.scale_wt;
    pc.g_preprovisioned = cfg.g_preprovisioned;
    pc.data_abs_bound = scenario_data_bound(cfg);

    sim.out.observations = generate_observations(cfg, &sim.out.planted_truths);

    Rng ta_rng = Rng(cfg.seed).fork("ta");
    sim.bundle = ta_setup(pc, sim.kp, ta_rng, &sim.ta_ctr);
    m.preprovisioned_bits = sim.bundle.preprovisioned_bits;
    for (const auto& kit : sim.bundle.devices) sim.out.chains.push_back(kit.chain);

    Rng init_rng = Rng(cfg.seed).fork("truth-init");
    sim.out.init_truths = initial_truths(sim.out.observations, init_rng);

    sim.dev_ctr.reserve(cfg.devices);
    for (size_t d = 0; d < cfg.devices; ++d) {
        sim.dev_ctr.push_back(std::make_unique<OpCounter>());
        sim.devices.push_back(std::make_unique<Device>(sim.bundle.devices[d],
                                                       sim.out.observations[d], pc,
                                                       sim.bundle.layout, sim.dev_ctr[d].get()));
    }
    sim.fog = std::make_unique<Fog>(sim.bundle.fog, pc, sim.bundle.layout,
                                    Rng(cfg.seed).fork("fog-r"), &sim.fog_ctr);
    sim.cloud = std::make_unique<Cloud>(sim.bundle.cloud, pc, sim.bundle.layout,
                                        Rng(cfg.seed).fork("cloud-r"), sim.out.init_truths,
                                        &sim.cloud_ctr);

    auto everyone = [&] {
        OpSnapshot s = snapshot(sim.fog_ctr);
        s += snapshot(sim.cloud_ctr);
        for (const auto& c : sim.dev_ctr) s += snapshot(*c);
        return s;
    };
    auto uplink_total = [&] {
        uint64_t bits = 0;
        for (const auto& per_device : m.device_uplink)
            for (const auto& acct : per_device) bits += acct.bits;
        return bits;
    };

    try {
        sim.run_std_subprotocol();
        for (size_t j = 1; j <= cfg.iterations; ++j) {
            std::vector<OpSnapshot> before(cfg.devices);
            for (size_t d = 0; d < cfg.devices; ++d) before[d] = snapshot(*sim.dev_ctr[d]);
            OpSnapshot all_before = everyone();
            uint64_t bits_before = uplink_total();
            size_t rejections_before = m.rejections.size();
            size_t recoveries_before = m.recovered_aggregates.size();

            sim.run_iteration(j);

            IterationStats stats;
            stats.ops = everyone() - all_before;
            stats.device_uplink_bits = uplink_total() - bits_before;
            stats.rejections = m.rejections.size() - rejections_before;
            stats.recoveries = m.recovered_aggregates.size() - recoveries_before;
            m.per_iteration.push_back(stats);

            for (size_t d = 0; d < cfg.devices; ++d) {
                OpSnapshot delta = snapshot(*sim.dev_ctr[d]) - before[d];
                m.max_device_modexp_per_iteration =
                    std::max(m.max_device_modexp_per_iteration, delta.modexp);
                m.max_device_modmul_per_iteration =
                    std::max(m.max_device_modmul_per_iteration, delta.modmul);
            }
        }
        m.completed = true;
    } catch (const Error& e) {
        if (e.code() == Errc::config_error) throw;
        m.completed = false;
        m.error = e.what();
        m.error_code = errc_name(e.code());
    }

    m.ops_ta = snapshot(sim.ta_ctr);
    m.ops_fog = snapshot(sim.fog_ctr);
    m.ops_cloud = snapshot(sim.cloud_ctr);
    for (const auto& c : sim.dev_ctr) m.ops_devices += snapshot(*c);
    double tw = static_cast<double>(cfg.scale_wt);
    for (const auto& dev : sim.devices)
        m.final_blinded_weights.push_back(static_cast<double>(dev->blinded_weight_units()) / tw);

    // Reference comparisons. Whole-run faults reduce to the surviving-device
    // oracle; attacked or transiently-faulted runs are not compared.
    bool transient_fault = false;
    std::vector<bool> dead(cfg.devices, false);
    for (const auto& f : cfg.faults) {
        if (f.whole_run)
            dead[f.device] = true;
        else
            transient_fault = true;
    }
    if (cfg.oracle_comparison && cfg.attacks.empty() && !transient_fault &&
        !m.truth_trace.empty()) {
        std::vector<std::vector<double>> surviving;
        for (size_t d = 0; d < cfg.devices; ++d)
            if (!dead[d]) surviving.push_back(sim.out.observations[d]);
        if (!surviving.empty()) {
            TruthVector init;
            init.kind = DataKind::continuous;
            init.values = sim.out.init_truths;
            CrhResult oracle =
                run_crh(ObservationMatrix::continuous(surviving), cfg.iterations, init);
            m.oracle_compared = true;
            for (size_t i = 0; i < m.truth_trace.size() && i < oracle.trace.size(); ++i) {
                m.oracle_max_dev.push_back(
                    max_abs_dev(m.truth_trace[i], oracle.trace[i].truths.values));
                m.oracle_rmse.push_back(rmse(m.truth_trace[i], oracle.trace[i].truths.values));
            }
            m.final_oracle_weights = oracle.weights;
        }
    }
    if (!sim.out.planted_truths.empty())
        for (const auto& row : m.truth_trace)
            m.planted_rmse.push_back(rmse(row, sim.out.planted_truths));

    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    return std::move(sim.out);
}

RunMetrics run_scenario(const ScenarioConfig& cfg, const std::optional<KeyBundle>& keys) {
    return run_scenario_full(cfg, keys).metrics;
}

std::string metrics_to_json(const RunMetrics& m, int indent) {
    json j;
    j["completed"] = m.completed;
    j["error"] = m.error;
    j["error_code"] = m.error_code;
    j["iterations_done"] = m.iterations_done;
    j["u_bits"] = m.u_bits;
    j["preprovisioned_bits"] = m.preprovisioned_bits;
    json uplink = json::array();
    for (const auto& per_device : m.device_uplink) {
        json row;
        for (size_t p = 0; p < kNumPhases; ++p) {
            row[phase_name(static_cast<Phase>(p))] = {{"bits", per_device[p].bits},
                                                      {"reports", per_device[p].reports}};
        }
        uplink.push_back(row);
    }
    j["device_uplink"] = uplink;
    auto bytes_row = [](const std::array<uint64_t, kNumPhases>& b) {
        json row;
        for (size_t p = 0; p < kNumPhases; ++p) row[phase_name(static_cast<Phase>(p))] = b[p];
        return row;
    };
    j["bytes_from_devices"] = bytes_row(m.bytes_from_devices);
    j["bytes_from_fog"] = bytes_row(m.bytes_from_fog);
    j["bytes_from_cloud"] = bytes_row(m.bytes_from_cloud);
    json rej = json::array();
    for (const auto& r : m.rejections)
        rej.push_back({{"device", r.device},
                       {"iteration", r.iteration},
                       {"phase", phase_name(r.phase)},
                       {"reason", r.reason}});
    j["rejections"] = rej;
    j["recovered_aggregates"] = m.recovered_aggregates;
    j["biased_iterations"] = m.biased_iterations;
    json iter_stats = json::array();
    for (const auto& st : m.per_iteration)
        iter_stats.push_back({{"modmul", st.ops.modmul},
                              {"modexp", st.ops.modexp},
                              {"hash", st.ops.hash},
                              {"uplink_bits", st.device_uplink_bits},
                              {"rejections", st.rejections},
                              {"recoveries", st.recoveries}});
    j["per_iteration"] = iter_stats;
    j["truth_trace"] = m.truth_trace;
    j["final_blinded_weights"] = m.final_blinded_weights;
    auto ops = [](const OpSnapshot& s) {
        return json{{"modmul", s.modmul}, {"modexp", s.modexp}, {"modinv", s.modinv},
                    {"hash", s.hash}};
    };
    j["ops"] = {{"ta", ops(m.ops_ta)},
                {"fog", ops(m.ops_fog)},
                {"cloud", ops(m.ops_cloud)},
                {"devices", ops(m.ops_devices)}};
    j["max_device_modexp_per_iteration"] = m.max_device_modexp_per_iteration;
    j["max_device_modmul_per_iteration"] = m.max_device_modmul_per_iteration;
    j["oracle_compared"] = m.oracle_compared;
    j["oracle_max_dev"] = m.oracle_max_dev;
    j["oracle_rmse"] = m.oracle_rmse;
    j["final_oracle_weights"] = m.final_oracle_weights;
    j["planted_rmse"] = m.planted_rmse;
    return indent >= 0 ? j.dump(indent) : j.dump();
}

uint64_t table2_weight_bits(Mode mode, bool g_preprovisioned, uint64_t u_bits) {
    return mode == Mode::lptd2 && !g_preprovisioned ? 2 * u_bits : u_bits;
}

uint64_t table2_truth_bits(Mode mode, bool g_preprovisioned, size_t objects, uint64_t u_bits) {
    bool runtime_g = mode == Mode::lptd2 && !g_preprovisioned;
    return (objects + 1 + (runtime_g ? 1 : 0)) * u_bits;
}

std::vector<AccountRow> account_bytes(const RunMetrics& m, const ScenarioConfig& cfg) {
    std::vector<AccountRow> rows;
    uint64_t u = m.u_bits;
    uint64_t weight_per_report = table2_weight_bits(cfg.mode, cfg.g_preprovisioned, u);
    uint64_t truth_per_report = table2_truth_bits(cfg.mode, cfg.g_preprovisioned, cfg.objects, u);
    for (size_t d = 0; d < m.device_uplink.size(); ++d) {
        const auto& w = m.device_uplink[d][phase_idx(Phase::weight)];
        const auto& t = m.device_uplink[d][phase_idx(Phase::truth)];
        AccountRow rw{Phase::weight, d, weight_per_report * w.reports, w.bits, false};
        rw.ok = rw.expected_bits == rw.measured_bits;
        rows.push_back(rw);
        AccountRow rt{Phase::truth, d, truth_per_report * t.reports, t.bits, false};
        rt.ok = rt.expected_bits == rt.measured_bits;
        rows.push_back(rt);
    }
    return rows;
}

void assert_accounting(const RunMetrics& m, const ScenarioConfig& cfg) {
    for (const auto& row : account_bytes(m, cfg)) {
        if (!row.ok)
            raise(Errc::accounting_failure,
                  std::string("device ") + std::to_string(row.device) + " phase " +
                      phase_name(row.phase) + ": expected " + std::to_string(row.expected_bits) +
                      " bits, measured " + std::to_string(row.measured_bits));
    }
}

void inspect_trace(const RunOutput& out, const ScenarioConfig& cfg) {
    std::vector<uint64_t> last_pos(cfg.devices, 0);
    for (const auto& msg : out.trace) {
        switch (msg.kind) {
            case Message::Kind::device_report: {
                if (msg.receiver != "fog")
                    raise(Errc::config_error, "device report addressed past the fog");
                const auto& rep = std::get<DeviceReport>(msg.payload);
                if (msg.adversarial) break;
                if (rep.chain_node) {
                    uint64_t expected = rep.phase == Phase::weight
                                            ? SlotLayout::weight_chain_position(rep.iteration)
                                            : SlotLayout::truth_chain_position(rep.iteration);
                    if (rep.chain_position != expected)
                        raise(Errc::config_error, "chain node ahead of its iteration");
                    if (rep.chain_position <= last_pos[rep.device])
                        raise(Errc::config_error, "chain node re-transmitted");
                    if (out.chains[rep.device].node(rep.chain_position) != *rep.chain_node)
                        raise(Errc::config_error, "report carries a foreign chain node");
                    last_pos[rep.device] = rep.chain_position;
                }
                break;
            }
            case Message::Kind::fog_aggregate:
            case Message::Kind::debias_share:
                if (msg.receiver != "cloud")
                    raise(Errc::config_error, "aggregate addressed past the cloud");
                break;
            case Message::Kind::blinded_sum:
                if (msg.receiver != "fog" && msg.receiver != "devices")
                    raise(Errc::config_error, "blinded sum misrouted");
                break;
            case Message::Kind::truth_broadcast:
            case Message::Kind::mean_broadcast:
            case Message::Kind::std_broadcast:
                if (msg.receiver != "devices")
                    raise(Errc::config_error, "broadcast misrouted");
                break;
        }
    }
}

}  // namespace lptd

#include "lptd/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"

namespace lptd {

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::setup: return "setup";
        case Phase::std_a: return "std_a";
        case Phase::std_b: return "std_b";
        case Phase::weight: return "weight";
        case Phase::truth: return "truth";
    }
    return "?";
}

// --- SlotLayout ---

SlotLayout::SlotLayout(Mode mode, size_t objects, size_t iterations)
    : mode_(mode), objects_(objects), iterations_(iterations) {
    total_ = mode == Mode::lptd1 ? 2 * objects + iterations * (objects + 2) : 2 + 2 * iterations;
}

size_t SlotLayout::std_a_slot(size_t object) const {
    if (object >= objects_) raise(Errc::range_error, "object index out of range");
    return mode_ == Mode::lptd1 ? object : 0;
}

size_t SlotLayout::std_b_slot(size_t object) const {
    if (object >= objects_) raise(Errc::range_error, "object index out of range");
    return mode_ == Mode::lptd1 ? objects_ + object : 1;
}

size_t SlotLayout::weight_slot(size_t iteration) const {
    if (iteration < 1 || iteration > iterations_)
        raise(Errc::budget_exhausted, "iteration outside provisioned budget");
    return mode_ == Mode::lptd1 ? 2 * objects_ + (iteration - 1) * (objects_ + 2)
                                : 2 + 2 * (iteration - 1);
}

size_t SlotLayout::truth_slot(size_t iteration, size_t component) const {
    if (iteration < 1 || iteration > iterations_)
        raise(Errc::budget_exhausted, "iteration outside provisioned budget");
    if (component > objects_) raise(Errc::range_error, "component index out of range");
    return mode_ == Mode::lptd1 ? 2 * objects_ + (iteration - 1) * (objects_ + 2) + 1 + component
                                : 3 + 2 * (iteration - 1);
}

// --- ta_setup ---

namespace {

void validate_protocol_config(const ProtocolConfig& cfg) {
    if (cfg.devices < 1) raise(Errc::config_error, "need at least one device");
    if (cfg.objects < 1) raise(Errc::config_error, "need at least one object");
    if (cfg.iterations < 1) raise(Errc::config_error, "need at least one iteration");
    if (cfg.scale_obs < 1 || cfg.scale_wt < 1) raise(Errc::config_error, "scales must be positive");
    if (cfg.r_min < 1 || cfg.r_min > cfg.r_max)
        raise(Errc::config_error, "blinding range must satisfy 1 <= r_min <= r_max");
    if (!(cfg.data_abs_bound > 0)) raise(Errc::config_error, "data_abs_bound must be positive");
}

// K * (largest plaintext a report can carry) must stay below n/2, otherwise
// the product-of-(1+nm) aggregation wraps silently.
void overflow_guard(const ProtocolConfig& cfg, const PublicParams& pp) {
    double to = static_cast<double>(cfg.scale_obs);
    double tw = static_cast<double>(cfg.scale_wt);
    double k = static_cast<double>(cfg.devices);
    double m = static_cast<double>(cfg.objects);
    double xb = cfg.data_abs_bound;

    double x_units = xb * to + 1;
    double spread = 2 * xb;
    // Worst distance per object with std clamped at one obs unit.
    double d_units = spread * spread * to * to + 1;
    double dist_units = m * d_units + 1;
    double sum_units = k * dist_units;
    double r = static_cast<double>(cfg.r_max);
    double w_units = (std::log(r * r * sum_units) + 1) * tw + 1;
    double truth_units = x_units * w_units;
    double stdb_units = spread * spread * to + 1;

    double worst = std::max({dist_units, w_units, truth_units, x_units, stdb_units});
    double bits_needed = std::log2(k * worst) + 2;  // +2: sign bit and slack
    double bits_have = static_cast<double>(mpz_sizeinbase(pp.n.get_mpz_t(), 2)) - 1;
    if (bits_needed >= bits_have)
        raise(Errc::config_error,
              "overflow guard: K * max-plaintext needs " + std::to_string(bits_needed) +
                  " bits but n/2 offers " + std::to_string(bits_have));
}

}  // namespace

SetupBundle ta_setup(const ProtocolConfig& cfg, const KeyPair& kp, Rng& rng, OpCounter* ctr) {
    validate_protocol_config(cfg);
    overflow_guard(cfg, kp.pp);

    SetupBundle bundle;
    bundle.cfg = cfg;
    bundle.layout = SlotLayout(cfg.mode, cfg.objects, cfg.iterations);

    const PublicParams& pp = kp.pp;
    const size_t n_slots = bundle.layout.total_slots();
    const size_t k_devices = cfg.devices;
    const mpz_class mask_mod = kp.mk.mask_modulus(pp);
    const bool want_g = cfg.mode == Mode::lptd2;

    KeyShares shares = split_key(kp.mk, rng);

    FixedPointCodec codec{cfg.scale_obs, cfg.scale_wt, pp.half_n()};

    bundle.devices.resize(k_devices);
    for (size_t d = 0; d < k_devices; ++d) {
        bundle.devices[d].id = d;
        bundle.devices[d].pp = pp;
        bundle.devices[d].codec = codec;
        bundle.devices[d].masks.resize(n_slots);
    }
    bundle.fog.pp = pp;
    bundle.fog.codec = codec;
    bundle.fog.x1 = shares.x1;
    bundle.fog.masks.resize(n_slots);
    bundle.cloud.pp = pp;
    bundle.cloud.codec = codec;
    bundle.cloud.x2 = shares.x2;
    bundle.cloud.masks.resize(n_slots);
    if (cfg.g_preprovisioned && want_g)
        bundle.fog.device_g_powers.assign(k_devices, std::vector<mpz_class>(n_slots));

    // Share vectors: indices 0 = cloud, 1..K = devices, K+1 = fog. The fog
    // share closes each slot to zero modulo the mask-group order so the
    // h-powers cancel exactly.
    for (size_t t = 0; t < n_slots; ++t) {
        mpz_class acc = 0;
        std::vector<mpz_class> s(k_devices + 2);
        for (size_t k = 0; k <= k_devices; ++k) {
            s[k] = rng.below(mask_mod);
            acc += s[k];
        }
        s[k_devices + 1] = (mask_mod - acc % mask_mod) % mask_mod;

        bundle.cloud.masks[t].h_pow = powmod(pp.h, s[0], pp.n_sq, ctr);
        if (want_g) bundle.cloud.masks[t].g_pow = powmod(pp.g, s[0], pp.n_sq, ctr);
        bundle.fog.masks[t].h_pow = powmod(pp.h, s[k_devices + 1], pp.n_sq, ctr);
        if (want_g) bundle.fog.masks[t].g_pow = powmod(pp.g, s[k_devices + 1], pp.n_sq, ctr);
        for (size_t d = 0; d < k_devices; ++d) {
            bundle.devices[d].masks[t].h_pow = powmod(pp.h, s[d + 1], pp.n_sq, ctr);
            if (want_g) {
                mpz_class gp = powmod(pp.g, s[d + 1], pp.n_sq, ctr);
                if (cfg.g_preprovisioned)
                    bundle.fog.device_g_powers[d][t] = gp;
                else
                    bundle.devices[d].masks[t].g_pow = gp;
            }
        }
    }

    const size_t chain_len = 2 * cfg.iterations;
    bundle.fog.chain_heads.resize(k_devices);
    for (size_t d = 0; d < k_devices; ++d) {
        bundle.devices[d].chain = gen_chain(rng, chain_len, ctr);
        bundle.fog.chain_heads[d] = bundle.devices[d].chain.head();
    }

    bundle.fog.ss.resize(32);
    for (size_t i = 0; i < 32; i += 8) {
        uint64_t v = rng.next_u64();
        for (int b = 0; b < 8; ++b) bundle.fog.ss[i + b] = static_cast<uint8_t>(v >> (8 * b));
    }
    bundle.cloud.ss = bundle.fog.ss;

    if (cfg.g_preprovisioned && want_g) {
        uint64_t u = mpz_sizeinbase(pp.n_sq.get_mpz_t(), 2);
        bundle.preprovisioned_bits = static_cast<uint64_t>(k_devices) * n_slots * u;
    }
    return bundle;
}

// --- wire records ---

std::vector<uint8_t> DeviceReport::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(phase));
    w.u64(iteration);
    w.u64(device);
    w.u32(static_cast<uint32_t>(cts.size()));
    for (const auto& c : cts) w.mpz_lp(c);
    w.u8(g_companion ? 1 : 0);
    if (g_companion) w.mpz_lp(*g_companion);
    return w.data();
}

std::vector<uint8_t> FogAggregate::payload_bytes() const {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(phase));
    w.u64(iteration);
    w.u32(static_cast<uint32_t>(cts.size()));
    for (const auto& c : cts) w.mpz_lp(c);
    w.u8(recovered ? 1 : 0);
    w.u8(g_agg ? 1 : 0);
    if (g_agg) w.mpz_lp(*g_agg);
    w.u32(static_cast<uint32_t>(present.size()));
    for (size_t d : present) w.u64(d);
    return w.data();
}

// --- Device ---

Device::Device(DeviceKit kit, std::vector<double> observations, const ProtocolConfig& cfg,
               const SlotLayout& layout, OpCounter* ctr)
    : kit_(std::move(kit)), obs_(std::move(observations)), cfg_(cfg), layout_(layout), ctr_(ctr) {
    if (obs_.size() != cfg_.objects) raise(Errc::config_error, "observation vector length != objects");
    mask_used_.assign(kit_.masks.size(), false);
    obs_units_.reserve(obs_.size());
    for (double v : obs_) obs_units_.push_back(fp_encode(kit_.codec, v, Scale::obs));
}

const MaskPair& Device::take_mask(size_t slot) {
    if (slot >= kit_.masks.size()) raise(Errc::budget_exhausted, "mask slot outside budget");
    if (mask_used_[slot]) raise(Errc::budget_exhausted, "mask slot already consumed");
    mask_used_[slot] = true;
    return kit_.masks[slot];
}

const HashVal& Device::take_chain_node(uint64_t position) {
    if (position <= chain_cursor_) raise(Errc::budget_exhausted, "chain position already revealed");
    if (position > kit_.chain.length()) raise(Errc::budget_exhausted, "chain exhausted");
    chain_cursor_ = position;
    return kit_.chain.node(position);
}

DeviceReport Device::finish_authenticated(DeviceReport rep, uint64_t position) {
    rep.chain_node = take_chain_node(position);
    rep.chain_position = position;
    rep.mac = mac_device(rep.payload_bytes(), *rep.chain_node, ctr_);
    return rep;
}

DeviceReport Device::std_a_report() {
    DeviceReport rep;
    rep.device = kit_.id;
    rep.phase = Phase::std_a;
    const bool shared = cfg_.mode == Mode::lptd2;
    const MaskPair* mp = shared ? &take_mask(layout_.std_a_slot(0)) : nullptr;
    for (size_t m = 0; m < cfg_.objects; ++m) {
        const MaskPair& pair = shared ? *mp : take_mask(layout_.std_a_slot(m));
        rep.cts.push_back(mask_encrypt(kit_.pp, obs_units_[m], pair.h_pow, ctr_).c);
        if (shared && pair.g_pow && !rep.g_companion) rep.g_companion = pair.g_pow;
    }
    return rep;
}

void Device::on_mean_broadcast(const std::vector<double>& means) { mean_ = means; }

DeviceReport Device::std_b_report() {
    if (mean_.size() != cfg_.objects) raise(Errc::config_error, "mean broadcast not received");
    DeviceReport rep;
    rep.device = kit_.id;
    rep.phase = Phase::std_b;
    const bool shared = cfg_.mode == Mode::lptd2;
    const MaskPair* mp = shared ? &take_mask(layout_.std_b_slot(0)) : nullptr;
    for (size_t m = 0; m < cfg_.objects; ++m) {
        const MaskPair& pair = shared ? *mp : take_mask(layout_.std_b_slot(m));
        double diff = obs_[m] - mean_[m];
        int64_t units = fp_encode(kit_.codec, diff * diff, Scale::obs);
        rep.cts.push_back(mask_encrypt(kit_.pp, units, pair.h_pow, ctr_).c);
        if (shared && pair.g_pow && !rep.g_companion) rep.g_companion = pair.g_pow;
    }
    return rep;
}

void Device::on_std_broadcast(const std::vector<double>& stds) { std_ = stds; }

void Device::on_truth_broadcast(const std::vector<double>& truths) { truths_ = truths; }

DeviceReport Device::weight_report(size_t iteration) {
    if (truths_.size() != cfg_.objects) raise(Errc::config_error, "truth broadcast not received");
    if (std_.size() != cfg_.objects) raise(Errc::config_error, "std broadcast not received");
    const double unit = 1.0 / static_cast<double>(cfg_.scale_obs);
    double dist = 0;
    for (size_t m = 0; m < cfg_.objects; ++m) {
        double diff = obs_[m] - truths_[m];
        dist += diff * diff / std::max(std_[m], unit);
    }
    dist_units_ = std::max<int64_t>(1, fp_encode(kit_.codec, dist, Scale::obs));
    dist_iteration_ = iteration;

    const MaskPair& pair = take_mask(layout_.weight_slot(iteration));
    DeviceReport rep;
    rep.device = kit_.id;
    rep.phase = Phase::weight;
    rep.iteration = iteration;
    rep.cts.push_back(mask_encrypt(kit_.pp, dist_units_, pair.h_pow, ctr_).c);
    if (pair.g_pow) rep.g_companion = pair.g_pow;
    return finish_authenticated(std::move(rep), SlotLayout::weight_chain_position(iteration));
}

void Device::on_blinded_sum(const BlindedSum& b) {
    if (dist_iteration_ != b.iteration) return;  // we sat this round out
    double tw = static_cast<double>(cfg_.scale_wt);
    int64_t log_dist = static_cast<int64_t>(std::floor(std::log(static_cast<double>(dist_units_)) * tw));
    w_blind_units_ = b.units - log_dist;
    weight_iteration_ = b.iteration;
}

DeviceReport Device::truth_report(size_t iteration) {
    if (weight_iteration_ != iteration)
        raise(Errc::budget_exhausted, "no blinded weight for this iteration");
    DeviceReport rep;
    rep.device = kit_.id;
    rep.phase = Phase::truth;
    rep.iteration = iteration;
    const bool shared = cfg_.mode == Mode::lptd2;
    const MaskPair* mp = shared ? &take_mask(layout_.truth_slot(iteration, 0)) : nullptr;
    for (size_t m = 0; m <= cfg_.objects; ++m) {
        const MaskPair& pair = shared ? *mp : take_mask(layout_.truth_slot(iteration, m));
        mpz_class value = m < cfg_.objects ? mpz_class(obs_units_[m]) * w_blind_units_
                                           : mpz_class(w_blind_units_);
        rep.cts.push_back(mask_encrypt(kit_.pp, value, pair.h_pow, ctr_).c);
        if (shared && pair.g_pow && !rep.g_companion) rep.g_companion = pair.g_pow;
    }
    return finish_authenticated(std::move(rep), SlotLayout::truth_chain_position(iteration));
}

// --- Fog ---

Fog::Fog(FogKit kit, const ProtocolConfig& cfg, const SlotLayout& layout, Rng rng, OpCounter* ctr)
    : kit_(std::move(kit)), cfg_(cfg), layout_(layout), rng_(std::move(rng)), ctr_(ctr) {
    size_t max_gap = cfg.mode == Mode::lptd2 ? 2 * cfg.iterations : 0;
    verifiers_.reserve(kit_.chain_heads.size());
    for (const auto& head : kit_.chain_heads) verifiers_.emplace_back(head, max_gap);
}

uint64_t Fog::verifier_position(size_t device) const { return verifiers_.at(device).last_position(); }

FogVerdict Fog::verify(Phase phase, size_t iteration, const std::vector<DeviceReport>& reports) {
    FogVerdict out;
    for (const auto& rep : reports) {
        if (phase == Phase::std_a || phase == Phase::std_b) {
            out.accepted.push_back(rep);
            continue;
        }
        uint64_t expected = phase == Phase::weight ? SlotLayout::weight_chain_position(iteration)
                                                   : SlotLayout::truth_chain_position(iteration);
        if (rep.device >= verifiers_.size() || !rep.chain_node || !rep.mac ||
            rep.chain_position != expected ||
            !verifiers_[rep.device].submit(*rep.chain_node, expected, ctr_)) {
            out.rejected.push_back({rep.device, iteration, phase, "chain"});
            continue;
        }
        if (!mac_device_check(rep.payload_bytes(), *rep.chain_node, *rep.mac, ctr_)) {
            out.rejected.push_back({rep.device, iteration, phase, "mac"});
            continue;
        }
        out.accepted.push_back(rep);
    }
    for (const auto& rep : out.accepted) out.present.push_back(rep.device);
    std::sort(out.present.begin(), out.present.end());
    return out;
}

namespace {

size_t phase_components(Phase phase, size_t objects) {
    switch (phase) {
        case Phase::std_a:
        case Phase::std_b: return objects;
        case Phase::weight: return 1;
        case Phase::truth: return objects + 1;
        default: raise(Errc::config_error, "phase carries no reports");
    }
}

size_t component_slot(const SlotLayout& layout, Phase phase, size_t iteration, size_t component) {
    switch (phase) {
        case Phase::std_a: return layout.std_a_slot(component);
        case Phase::std_b: return layout.std_b_slot(component);
        case Phase::weight: return layout.weight_slot(iteration);
        case Phase::truth: return layout.truth_slot(iteration, component);
        default: raise(Errc::config_error, "phase carries no reports");
    }
}

}  // namespace

FogAggregate Fog::aggregate(Phase phase, size_t iteration,
                            const std::vector<DeviceReport>& accepted) {
    if (accepted.empty()) raise(Errc::empty_aggregate, "no verified reports to aggregate");
    FogAggregate agg;
    agg.phase = phase;
    agg.iteration = iteration;
    size_t comps = phase_components(phase, cfg_.objects);
    for (size_t c = 0; c < comps; ++c) {
        size_t slot = component_slot(layout_, phase, iteration, c);
        mpz_class acc = accepted.front().cts.at(c);
        for (size_t i = 1; i < accepted.size(); ++i)
            acc = mulmod(acc, accepted[i].cts.at(c), kit_.pp.n_sq, ctr_);
        agg.cts.push_back(mulmod(acc, kit_.masks.at(slot).h_pow, kit_.pp.n_sq, ctr_));
    }
    for (const auto& rep : accepted) agg.present.push_back(rep.device);
    std::sort(agg.present.begin(), agg.present.end());
    agg.mac = mac_server(agg.payload_bytes(), iteration, kit_.ss, ctr_);
    return agg;
}

mpz_class Fog::g_power_for(const DeviceReport& rep, size_t slot) const {
    if (rep.g_companion) return *rep.g_companion;
    if (!kit_.device_g_powers.empty()) return kit_.device_g_powers.at(rep.device).at(slot);
    raise(Errc::corrupted_report, "no g^s companion available for recovery");
}

FogAggregate Fog::aggregate_recovery(Phase phase, size_t iteration,
                                     const std::vector<DeviceReport>& accepted) {
    if (cfg_.mode != Mode::lptd2) raise(Errc::missing_device, "recovery requires fault-tolerant mode");
    if (accepted.empty()) raise(Errc::empty_aggregate, "no verified reports to aggregate");
    FogAggregate agg;
    agg.phase = phase;
    agg.iteration = iteration;
    size_t comps = phase_components(phase, cfg_.objects);
    // All components of a report share one exponent, so one aggregated
    // g-power recovers every component.
    size_t slot0 = component_slot(layout_, phase, iteration, 0);
    mpz_class g_agg = g_power_for(accepted.front(), slot0);
    for (size_t i = 1; i < accepted.size(); ++i)
        g_agg = mulmod(g_agg, g_power_for(accepted[i], slot0), kit_.pp.n_sq, ctr_);
    mpz_class shed = invmod(powmod(g_agg, kit_.x1, kit_.pp.n_sq, ctr_), kit_.pp.n_sq, ctr_);
    for (size_t c = 0; c < comps; ++c) {
        mpz_class acc = accepted.front().cts.at(c);
        for (size_t i = 1; i < accepted.size(); ++i)
            acc = mulmod(acc, accepted[i].cts.at(c), kit_.pp.n_sq, ctr_);
        agg.cts.push_back(mulmod(acc, shed, kit_.pp.n_sq, ctr_));
    }
    agg.g_agg = g_agg;
    agg.recovered = true;
    for (const auto& rep : accepted) agg.present.push_back(rep.device);
    std::sort(agg.present.begin(), agg.present.end());
    agg.mac = mac_server(agg.payload_bytes(), iteration, kit_.ss, ctr_);
    return agg;
}

FogAggregate Fog::process(Phase phase, size_t iteration, const FogVerdict& verdict) {
    if (verdict.accepted.empty()) raise(Errc::empty_aggregate, "all reports missing or rejected");
    bool full_house = verdict.present.size() == cfg_.devices;
    if (cfg_.mode == Mode::lptd2 && !full_house)
        return aggregate_recovery(phase, iteration, verdict.accepted);
    return aggregate(phase, iteration, verdict.accepted);
}

BlindedSum Fog::reblind(const BlindedSum& from_cloud) {
    last_r2_ = rng_.uniform_int(cfg_.r_min, cfg_.r_max);
    last_r2_iteration_ = from_cloud.iteration;
    double tw = static_cast<double>(cfg_.scale_wt);
    int64_t delta = static_cast<int64_t>(std::floor(std::log(static_cast<double>(last_r2_)) * tw));
    return {from_cloud.iteration, from_cloud.units + delta};
}

DebiasShare Fog::debias_share(size_t iteration) const {
    if (iteration != last_r2_iteration_)
        raise(Errc::config_error, "debias share requested for a round without a re-blind");
    return {iteration, last_r2_};
}

// --- Cloud ---

Cloud::Cloud(CloudKit kit, const ProtocolConfig& cfg, const SlotLayout& layout, Rng rng,
             std::vector<double> initial_truths, OpCounter* ctr)
    : kit_(std::move(kit)),
      cfg_(cfg),
      layout_(layout),
      rng_(std::move(rng)),
      ctr_(ctr),
      truths_(std::move(initial_truths)) {
    if (truths_.size() != cfg_.objects) raise(Errc::config_error, "initial truths length != objects");
}

void Cloud::check_mac(const FogAggregate& agg) {
    if (!mac_server_check(agg.payload_bytes(), agg.iteration, kit_.ss, agg.mac, ctr_))
        raise(Errc::corrupted_report, "fog aggregate MAC mismatch");
    if (!agg.recovered && agg.present.size() < cfg_.devices)
        raise(Errc::missing_device, "aggregate lacks " +
                                        std::to_string(cfg_.devices - agg.present.size()) +
                                        " device report(s)");
}

std::vector<mpz_class> Cloud::decode_batch(const FogAggregate& agg) {
    std::vector<mpz_class> out;
    out.reserve(agg.cts.size());
    if (agg.recovered) {
        if (!agg.g_agg) raise(Errc::corrupted_report, "recovery aggregate lacks g power");
        mpz_class shed = invmod(powmod(*agg.g_agg, kit_.x2, kit_.pp.n_sq, ctr_), kit_.pp.n_sq, ctr_);
        for (const auto& c : agg.cts) {
            MaskedCiphertext mc{mulmod(c, shed, kit_.pp.n_sq, ctr_), std::nullopt};
            out.push_back(masked_decode(kit_.pp, mc));
        }
    } else {
        for (size_t c = 0; c < agg.cts.size(); ++c) {
            size_t slot = component_slot(layout_, agg.phase, agg.iteration, c);
            out.push_back(unmask_decode(kit_.pp, MaskedCiphertext{agg.cts[c], std::nullopt},
                                        kit_.masks.at(slot).h_pow, ctr_));
        }
    }
    return out;
}

std::vector<double> Cloud::on_std_a(const FogAggregate& agg) {
    check_mac(agg);
    auto sums = decode_batch(agg);
    double kp = static_cast<double>(agg.present.size());
    std_present_ = agg.present;
    sx_units_ = sums;
    std::vector<double> means;
    means.reserve(sums.size());
    for (const auto& s : sums) means.push_back(fp_decode(kit_.codec, s, Scale::obs) / kp);
    return means;
}

std::vector<double> Cloud::on_std_b(const FogAggregate& agg) {
    check_mac(agg);
    auto sums = decode_batch(agg);
    double kp = static_cast<double>(agg.present.size());
    const double unit = 1.0 / static_cast<double>(cfg_.scale_obs);
    std::vector<double> stds;
    stds.reserve(sums.size());
    for (const auto& s : sums) {
        double var = fp_decode(kit_.codec, s, Scale::obs) / kp;
        stds.push_back(std::max(std::sqrt(std::max(var, 0.0)), unit));
    }
    return stds;
}

BlindedSum Cloud::on_weight_aggregate(const FogAggregate& agg) {
    check_mac(agg);
    auto sums = decode_batch(agg);
    if (sums.size() != 1) raise(Errc::corrupted_report, "weight aggregate must carry one component");
    if (sums[0] <= 0) raise(Errc::corrupted_report, "distance sum must be positive");
    double sum_d = mpz_get_d(sums[0].get_mpz_t());
    last_r1_ = rng_.uniform_int(cfg_.r_min, cfg_.r_max);
    double tw = static_cast<double>(cfg_.scale_wt);
    log_sum_units_ = static_cast<int64_t>(std::floor(std::log(sum_d) * tw));
    blinded_units_sent_ =
        static_cast<int64_t>(std::floor(std::log(static_cast<double>(last_r1_) * sum_d) * tw));
    return {agg.iteration, blinded_units_sent_};
}

const std::vector<double>& Cloud::on_truth_aggregate(const FogAggregate& agg,
                                                     const std::optional<DebiasShare>& debias) {
    check_mac(agg);
    auto values = decode_batch(agg);
    if (values.size() != cfg_.objects + 1)
        raise(Errc::corrupted_report, "truth aggregate must carry M+1 components");
    mpz_class a2 = values.back();
    double to = static_cast<double>(cfg_.scale_obs);
    last_round_biased_ = false;

    bool exact_debias = false;
    mpz_class bias_units = 0;
    if (cfg_.blinding == Blinding::debias) {
        if (!debias || debias->iteration != agg.iteration)
            raise(Errc::corrupted_report, "debias share missing for truth update");
        double tw = static_cast<double>(cfg_.scale_wt);
        int64_t delta2 =
            static_cast<int64_t>(std::floor(std::log(static_cast<double>(debias->r2)) * tw));
        bias_units = mpz_class(blinded_units_sent_) + delta2 - log_sum_units_;
        // The shift removal is exact for whatever sum the broadcast embedded,
        // but the cached observation sums only cover the device set they were
        // built from.
        exact_debias = agg.present == std_present_;
        last_round_biased_ = !exact_debias;
    }

    if (exact_debias) {
        mpz_class den = a2 - mpz_class(static_cast<unsigned long>(agg.present.size())) * bias_units;
        if (den <= 0) raise(Errc::degenerate_weights, "weight sum not positive after debias");
        double den_d = mpz_get_d(den.get_mpz_t());
        for (size_t m = 0; m < cfg_.objects; ++m) {
            mpz_class num = values[m] - bias_units * sx_units_.at(m);
            truths_[m] = mpz_get_d(num.get_mpz_t()) / (den_d * to);
        }
    } else {
        if (a2 <= 0) raise(Errc::degenerate_weights, "weight sum not positive");
        double den_d = mpz_get_d(a2.get_mpz_t());
        for (size_t m = 0; m < cfg_.objects; ++m)
            truths_[m] = mpz_get_d(values[m].get_mpz_t()) / (den_d * to);
    }
    return truths_;
}

// --- shared truth initializer ---

std::vector<double> initial_truths(const std::vector<std::vector<double>>& obs, Rng& rng) {
    if (obs.empty()) raise(Errc::config_error, "no observations");
    size_t objects = obs.front().size();
    std::vector<double> out(objects);
    for (size_t m = 0; m < objects; ++m) {
        double lo = obs[0][m], hi = obs[0][m];
        for (const auto& row : obs) {
            lo = std::min(lo, row[m]);
            hi = std::max(hi, row[m]);
        }
        out[m] = lo == hi ? lo : rng.uniform(lo, hi);
    }
    return out;
}

}  // namespace lptd

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include <lptd/errors.hpp>
#include <lptd/protocol.hpp>
#include <lptd/truth.hpp>

using namespace lptd;

namespace {

const KeyPair& shared_keys() {
    static KeyPair kp = [] {
        Rng rng(20250101);
        return keygen(64, rng);
    }();
    return kp;
}

ProtocolConfig small_config(Mode mode, size_t k = 3, size_t m = 2, size_t w = 2) {
    ProtocolConfig pc;
    pc.devices = k;
    pc.objects = m;
    pc.iterations = w;
    pc.mode = mode;
    pc.r_min = 2;
    pc.r_max = 64;
    pc.data_abs_bound = 16.0;
    return pc;
}

// Hand-driven single deployment: TA setup plus live entities, no bus.
struct Rig {
    ProtocolConfig pc;
    SetupBundle bundle;
    std::vector<std::unique_ptr<Device>> devices;
    std::unique_ptr<Fog> fog;
    std::unique_ptr<Cloud> cloud;
    OpCounter dev_ctr;

    Rig(ProtocolConfig cfg, const std::vector<std::vector<double>>& obs, uint64_t seed = 99)
        : pc(cfg) {
        Rng ta_rng(seed);
        bundle = ta_setup(pc, shared_keys(), ta_rng);
        Rng init_rng = Rng(seed).fork("init");
        auto init = initial_truths(obs, init_rng);
        for (size_t d = 0; d < pc.devices; ++d)
            devices.push_back(
                std::make_unique<Device>(bundle.devices[d], obs[d], pc, bundle.layout, &dev_ctr));
        fog = std::make_unique<Fog>(bundle.fog, pc, bundle.layout, Rng(seed).fork("fog"));
        cloud = std::make_unique<Cloud>(bundle.cloud, pc, bundle.layout, Rng(seed).fork("cloud"),
                                        init);
    }

    std::vector<DeviceReport> reports(Phase phase, size_t j) {
        std::vector<DeviceReport> out;
        for (auto& d : devices) {
            switch (phase) {
                case Phase::std_a: out.push_back(d->std_a_report()); break;
                case Phase::std_b: out.push_back(d->std_b_report()); break;
                case Phase::weight: out.push_back(d->weight_report(j)); break;
                case Phase::truth: out.push_back(d->truth_report(j)); break;
                default: break;
            }
        }
        return out;
    }

    void run_std() {
        auto a = fog->process(Phase::std_a, 0, fog->verify(Phase::std_a, 0, reports(Phase::std_a, 0)));
        auto means = cloud->on_std_a(a);
        for (auto& d : devices) d->on_mean_broadcast(means);
        auto b = fog->process(Phase::std_b, 0, fog->verify(Phase::std_b, 0, reports(Phase::std_b, 0)));
        auto stds = cloud->on_std_b(b);
        for (auto& d : devices) d->on_std_broadcast(stds);
    }

    // One full weight+truth round; returns the updated truths.
    std::vector<double> run_iteration(size_t j) {
        for (auto& d : devices) d->on_truth_broadcast(cloud->truths());
        auto wagg = fog->process(Phase::weight, j, fog->verify(Phase::weight, j, reports(Phase::weight, j)));
        BlindedSum b2 = fog->reblind(cloud->on_weight_aggregate(wagg));
        for (auto& d : devices) d->on_blinded_sum(b2);
        auto tagg = fog->process(Phase::truth, j, fog->verify(Phase::truth, j, reports(Phase::truth, j)));
        std::optional<DebiasShare> share;
        if (pc.blinding == Blinding::debias) share = fog->debias_share(j);
        return cloud->on_truth_aggregate(tagg, share);
    }
};

std::vector<std::vector<double>> demo_obs() {
    return {{1.0, 2.0}, {1.5, 2.5}, {0.5, 3.0}};
}

}  // namespace

TEST_CASE("ta_setup: per-slot mask products cancel for every party set") {
    for (Mode mode : {Mode::lptd1, Mode::lptd2}) {
        ProtocolConfig pc = small_config(mode);
        Rng rng(1);
        SetupBundle b = ta_setup(pc, shared_keys(), rng);
        const auto& pp = shared_keys().pp;
        for (size_t t = 0; t < b.layout.total_slots(); ++t) {
            mpz_class prod = b.cloud.masks[t].h_pow;
            prod = mulmod(prod, b.fog.masks[t].h_pow, pp.n_sq, nullptr);
            for (const auto& dev : b.devices) prod = mulmod(prod, dev.masks[t].h_pow, pp.n_sq, nullptr);
            CHECK(prod == 1);
            if (mode == Mode::lptd2) {
                mpz_class gp = *b.cloud.masks[t].g_pow;
                gp = mulmod(gp, *b.fog.masks[t].g_pow, pp.n_sq, nullptr);
                for (const auto& dev : b.devices) gp = mulmod(gp, *dev.masks[t].g_pow, pp.n_sq, nullptr);
                CHECK(gp == 1);
            }
        }
    }
}

TEST_CASE("ta_setup: single device share is forced by the server shares") {
    ProtocolConfig pc = small_config(Mode::lptd1, 1, 1, 1);
    Rng rng(2);
    SetupBundle b = ta_setup(pc, shared_keys(), rng);
    const auto& pp = shared_keys().pp;
    for (size_t t = 0; t < b.layout.total_slots(); ++t) {
        mpz_class servers =
            mulmod(b.cloud.masks[t].h_pow, b.fog.masks[t].h_pow, pp.n_sq, nullptr);
        CHECK(mulmod(servers, b.devices[0].masks[t].h_pow, pp.n_sq, nullptr) == 1);
    }
}

TEST_CASE("ta_setup: mode contract for g-powers") {
    Rng rng(3);
    SetupBundle one = ta_setup(small_config(Mode::lptd1), shared_keys(), rng);
    CHECK_FALSE(one.fog.masks[0].g_pow.has_value());
    CHECK_FALSE(one.cloud.masks[0].g_pow.has_value());
    CHECK_FALSE(one.devices[0].masks[0].g_pow.has_value());
    CHECK(one.preprovisioned_bits == 0);

    SetupBundle two = ta_setup(small_config(Mode::lptd2), shared_keys(), rng);
    CHECK(two.fog.masks[0].g_pow.has_value());
    CHECK(two.cloud.masks[0].g_pow.has_value());
    CHECK(two.devices[0].masks[0].g_pow.has_value());

    ProtocolConfig pre = small_config(Mode::lptd2);
    pre.g_preprovisioned = true;
    SetupBundle three = ta_setup(pre, shared_keys(), rng);
    CHECK_FALSE(three.devices[0].masks[0].g_pow.has_value());
    CHECK(three.fog.device_g_powers.size() == pre.devices);
    uint64_t u = mpz_sizeinbase(shared_keys().pp.n_sq.get_mpz_t(), 2);
    CHECK(three.preprovisioned_bits == pre.devices * three.layout.total_slots() * u);

    SUBCASE("chains cover two reports per iteration") {
        CHECK(two.devices[0].chain.length() == 2 * pre.iterations);
    }
}

TEST_CASE("ta_setup: overflow guard rejects tiny moduli") {
    KeyPair toy = keygen_explicit(23, 47, 123, 77);
    ProtocolConfig pc = small_config(Mode::lptd1);
    Rng rng(4);
    CHECK_THROWS_AS(ta_setup(pc, toy, rng), Error);
    try {
        Rng rng2(4);
        ta_setup(pc, toy, rng2);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::config_error);
    }
}

TEST_CASE("weight report: structure, zero-distance floor and single-use cursors") {
    Rig rig(small_config(Mode::lptd1), demo_obs());
    rig.run_std();
    // make observations equal the truths for device 0: feed its own obs back
    std::vector<double> truths = demo_obs()[0];
    for (auto& d : rig.devices) d->on_truth_broadcast(truths);

    DeviceReport rep = rig.devices[0]->weight_report(1);
    CHECK(rep.cts.size() == 1);
    CHECK_FALSE(rep.g_companion.has_value());
    CHECK(rep.chain_position == 1);
    CHECK(rig.devices[0]->dist_units() == 1);  // floored at one unit
    // C = (1 + n) * h^s for the weight slot of iteration 1
    const auto& pp = shared_keys().pp;
    size_t slot = rig.bundle.layout.weight_slot(1);
    mpz_class expect =
        mulmod(1 + pp.n, rig.bundle.devices[0].masks[slot].h_pow, pp.n_sq, nullptr);
    CHECK(rep.cts[0] == expect);
    CHECK(mac_device_check(rep.payload_bytes(), *rep.chain_node, *rep.mac));

    CHECK_THROWS_AS(rig.devices[0]->weight_report(1), Error);  // cursor already burned
}

TEST_CASE("weight phase end to end matches the quantized distances") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    pc.r_min = pc.r_max = 1;
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto verdict = rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1));
    CHECK(verdict.rejected.empty());
    CHECK(verdict.present.size() == 3);
    FogAggregate agg = rig.fog->process(Phase::weight, 1, verdict);
    BlindedSum b = rig.cloud->on_weight_aggregate(agg);
    int64_t expected_sum = 0;
    for (auto& d : rig.devices) expected_sum += d->dist_units();
    // r = 1: the broadcast is floor(log(sum) * Tw) exactly
    int64_t expect_units = static_cast<int64_t>(
        std::floor(std::log(static_cast<double>(expected_sum)) * static_cast<double>(pc.scale_wt)));
    CHECK(b.units == expect_units);
}

TEST_CASE("fog rejects stale chain nodes, tampered payloads and unknown nodes") {
    ProtocolConfig pc = small_config(Mode::lptd2, 3, 2, 3);
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());

    auto reports = rig.reports(Phase::weight, 1);
    auto verdict = rig.fog->verify(Phase::weight, 1, reports);
    CHECK(verdict.rejected.empty());
    rig.fog->process(Phase::weight, 1, verdict);
    BlindedSum b2 = rig.fog->reblind(rig.cloud->on_weight_aggregate(
        rig.fog->process(Phase::weight, 1, verdict)));
    // ^ second process call is fine: aggregation is pure over the verdict
    for (auto& d : rig.devices) d->on_blinded_sum(b2);
    auto treports = rig.reports(Phase::truth, 1);
    rig.fog->process(Phase::truth, 1, rig.fog->verify(Phase::truth, 1, treports));

    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto round2 = rig.reports(Phase::weight, 2);

    SUBCASE("replayed report from the previous round is rejected; rest aggregate") {
        std::vector<DeviceReport> mixed{reports[0], round2[1], round2[2]};
        auto v = rig.fog->verify(Phase::weight, 2, mixed);
        REQUIRE(v.rejected.size() == 1);
        CHECK(v.rejected[0].device == 0);
        CHECK(v.rejected[0].reason == "chain");
        CHECK(v.present == std::vector<size_t>{1, 2});
        FogAggregate agg = rig.fog->process(Phase::weight, 2, v);
        CHECK(agg.recovered);  // fault path covers the gap
        BlindedSum b = rig.cloud->on_weight_aggregate(agg);
        CHECK(b.iteration == 2);
    }
    SUBCASE("tampered ciphertext with a stale tag is rejected") {
        std::vector<DeviceReport> mixed = round2;
        mpz_combit(mixed[1].cts[0].get_mpz_t(), 3);
        auto v = rig.fog->verify(Phase::weight, 2, mixed);
        REQUIRE(v.rejected.size() == 1);
        CHECK(v.rejected[0].device == 1);
        CHECK(v.rejected[0].reason == "mac");
    }
    SUBCASE("forged report with a random chain value is rejected") {
        DeviceReport forged = round2[0];
        forged.chain_node->fill(0x99);
        forged.mac = mac_device(forged.payload_bytes(), *forged.chain_node);
        std::vector<DeviceReport> mixed{forged, round2[1], round2[2]};
        auto v = rig.fog->verify(Phase::weight, 2, mixed);
        REQUIRE(v.rejected.size() == 1);
        CHECK(v.rejected[0].reason == "chain");
    }
    SUBCASE("empty verdicts raise empty-aggregate") {
        FogVerdict empty;
        CHECK_THROWS_AS(rig.fog->process(Phase::weight, 2, empty), Error);
    }
}

TEST_CASE("lptd1 strict verifier refuses gaps; lptd2 verifier catches up") {
    for (Mode mode : {Mode::lptd1, Mode::lptd2}) {
        ProtocolConfig pc = small_config(mode, 1, 1, 3);
        Rig rig(pc, {{2.0}});
        rig.run_std();
        for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
        auto r1 = rig.devices[0]->weight_report(1);
        CHECK(rig.fog->verify(Phase::weight, 1, {r1}).rejected.empty());
        rig.devices[0]->on_blinded_sum({1, 0});
        (void)rig.devices[0]->truth_report(1);  // consumed but never delivered
        // skip straight to iteration 2's weight report: positions 2 is a gap
        auto r2 = rig.devices[0]->weight_report(2);
        auto v = rig.fog->verify(Phase::weight, 2, {r2});
        if (mode == Mode::lptd1)
            CHECK(v.rejected.size() == 1);
        else
            CHECK(v.rejected.empty());
    }
}

TEST_CASE("cloud rejects forged aggregate tags and undersized lptd1 aggregates") {
    Rig rig(small_config(Mode::lptd1), demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto verdict = rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1));
    FogAggregate agg = rig.fog->process(Phase::weight, 1, verdict);

    SUBCASE("forged mac") {
        FogAggregate evil = agg;
        evil.mac[0] ^= 1;
        CHECK_THROWS_AS(rig.cloud->on_weight_aggregate(evil), Error);
    }
    SUBCASE("missing device in lptd1 surfaces as missing-device") {
        FogVerdict v2;
        v2.accepted = {verdict.accepted[0], verdict.accepted[1]};
        v2.present = {0, 1};
        FogAggregate partial = rig.fog->aggregate(Phase::weight, 1, v2.accepted);
        try {
            rig.cloud->on_weight_aggregate(partial);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::missing_device);
        }
    }
}

TEST_CASE("blinded weights: additive shift cancels in differences and hides the sum") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto verdict = rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1));
    BlindedSum b1 = rig.cloud->on_weight_aggregate(rig.fog->process(Phase::weight, 1, verdict));
    BlindedSum b2 = rig.fog->reblind(b1);
    for (auto& d : rig.devices) d->on_blinded_sum(b2);

    int64_t w0 = rig.devices[0]->blinded_weight_units();
    int64_t w1 = rig.devices[1]->blinded_weight_units();
    double tw = static_cast<double>(pc.scale_wt);
    auto lk = [&](int64_t d) {
        return static_cast<int64_t>(std::floor(std::log(static_cast<double>(d)) * tw));
    };
    CHECK(w0 - w1 == lk(rig.devices[1]->dist_units()) - lk(rig.devices[0]->dist_units()));

    // Shifting the broadcast shifts every blinded weight identically.
    BlindedSum shifted{b2.iteration, b2.units + 12345};
    for (auto& d : rig.devices) d->on_blinded_sum(shifted);
    CHECK(rig.devices[0]->blinded_weight_units() == w0 + 12345);
    CHECK(rig.devices[0]->blinded_weight_units() - rig.devices[1]->blinded_weight_units() ==
          w0 - w1);

    // Reconstruction attempt: many candidate r values yield a plausible
    // integer distance sum, so the true one is not identifiable.
    int64_t sum_true = 0;
    for (auto& d : rig.devices) sum_true += d->dist_units();
    double wreal = static_cast<double>(w0) / tw;
    double dist0 = static_cast<double>(rig.devices[0]->dist_units());
    int plausible = 0;
    for (int64_t r = 2; r <= 65536 && plausible < 2; ++r) {
        double candidate = std::exp(wreal) * dist0 / static_cast<double>(r);
        if (candidate >= 3.0 && std::fabs(candidate - std::round(candidate)) < 0.4) ++plausible;
    }
    CHECK(plausible >= 2);
}

TEST_CASE("fog re-blind is additive in the log domain") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    SUBCASE("r2 forced to 1 leaves the broadcast unchanged") {
        pc.r_min = pc.r_max = 1;
        Rig rig(pc, demo_obs());
        BlindedSum in{1, 42'000'000};
        CHECK(rig.fog->reblind(in).units == in.units);
    }
    SUBCASE("fixed r2 adds exactly floor(log(r2) * Tw)") {
        pc.r_min = pc.r_max = 5;
        Rig rig(pc, demo_obs());
        BlindedSum in{1, 42'000'000};
        int64_t delta = static_cast<int64_t>(
            std::floor(std::log(5.0) * static_cast<double>(pc.scale_wt)));
        CHECK(rig.fog->reblind(in).units == in.units + delta);
    }
}

TEST_CASE("truth report carries M+1 components and zero weight encodes zeros") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    pc.r_min = pc.r_max = 1;
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto verdict = rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1));
    BlindedSum b = rig.fog->reblind(rig.cloud->on_weight_aggregate(
        rig.fog->process(Phase::weight, 1, verdict)));
    // force a zero blinded weight on device 0 by feeding its own log back
    double tw = static_cast<double>(pc.scale_wt);
    int64_t l0 = static_cast<int64_t>(
        std::floor(std::log(static_cast<double>(rig.devices[0]->dist_units())) * tw));
    rig.devices[0]->on_blinded_sum({1, l0});
    for (size_t d = 1; d < 3; ++d) rig.devices[d]->on_blinded_sum(b);

    DeviceReport rep = rig.devices[0]->truth_report(1);
    CHECK(rep.cts.size() == pc.objects + 1);
    CHECK(rep.chain_position == 2);
    CHECK(rig.devices[0]->blinded_weight_units() == 0);
    // all components of a zero-weight report encode zero: c = h^s exactly
    for (size_t c = 0; c <= pc.objects; ++c) {
        size_t slot = rig.bundle.layout.truth_slot(1, c);
        CHECK(rep.cts[c] == rig.bundle.devices[0].masks[slot].h_pow);
    }
}

TEST_CASE("truth aggregates decode to the exact weighted sums") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto wagg = rig.fog->process(Phase::weight, 1,
                                 rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1)));
    BlindedSum b = rig.fog->reblind(rig.cloud->on_weight_aggregate(wagg));
    for (auto& d : rig.devices) d->on_blinded_sum(b);

    // independent integer oracle for the expected aggregates
    std::vector<mpz_class> expect_a1(pc.objects, 0);
    mpz_class expect_a2 = 0;
    for (auto& d : rig.devices) {
        mpz_class w = d->blinded_weight_units();
        expect_a2 += w;
        for (size_t m = 0; m < pc.objects; ++m) {
            int64_t xm = fp_encode(rig.bundle.devices[0].codec, d->observations()[m], Scale::obs);
            expect_a1[m] += mpz_class(xm) * w;
        }
    }

    auto tagg = rig.fog->process(Phase::truth, 1,
                                 rig.fog->verify(Phase::truth, 1, rig.reports(Phase::truth, 1)));
    // decode through a throwaway cloud clone path: use debias share and the
    // public truth update, then reconstruct the sums via the update formula.
    auto share = rig.fog->debias_share(1);
    auto truths = rig.cloud->on_truth_aggregate(tagg, share);
    CHECK(truths.size() == pc.objects);
    // the debiased update equals the oracle update on clean weights
    std::vector<double> clean_w;
    double tw = static_cast<double>(pc.scale_wt);
    int64_t sum_units = 0;
    for (auto& d : rig.devices) sum_units += d->dist_units();
    for (auto& d : rig.devices) {
        int64_t lsum = static_cast<int64_t>(
            std::floor(std::log(static_cast<double>(sum_units)) * tw));
        int64_t lk = static_cast<int64_t>(
            std::floor(std::log(static_cast<double>(d->dist_units())) * tw));
        clean_w.push_back(static_cast<double>(lsum - lk) / tw);
    }
    for (size_t m = 0; m < pc.objects; ++m) {
        double num = 0, den = 0;
        for (size_t d = 0; d < 3; ++d) {
            num += clean_w[d] * demo_obs()[d][m];
            den += clean_w[d];
        }
        CHECK(truths[m] == doctest::Approx(num / den).epsilon(1e-4));
    }
    (void)expect_a1;
    (void)expect_a2;
}

TEST_CASE("debias-mode truths are exactly invariant to the blinding factors") {
    auto run_with_r = [&](int64_t r) {
        ProtocolConfig pc = small_config(Mode::lptd1, 3, 2, 2);
        pc.r_min = pc.r_max = r;
        Rig rig(pc, demo_obs(), 555);
        rig.run_std();
        std::vector<double> t1 = rig.run_iteration(1);
        std::vector<double> t2 = rig.run_iteration(2);
        t1.insert(t1.end(), t2.begin(), t2.end());
        return t1;
    };
    auto a = run_with_r(2);
    auto b = run_with_r(1024);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // bit-identical
}

TEST_CASE("paper-literal mode with r = 1 equals debias mode") {
    auto run_mode = [&](Blinding blinding) {
        ProtocolConfig pc = small_config(Mode::lptd1, 3, 2, 2);
        pc.blinding = blinding;
        pc.r_min = pc.r_max = 1;
        Rig rig(pc, demo_obs(), 777);
        rig.run_std();
        rig.run_iteration(1);
        return rig.run_iteration(2);
    };
    auto literal = run_mode(Blinding::paper_literal);
    auto debias = run_mode(Blinding::debias);
    REQUIRE(literal.size() == debias.size());
    for (size_t i = 0; i < literal.size(); ++i)
        CHECK(literal[i] == doctest::Approx(debias[i]).epsilon(1e-12));
}

TEST_CASE("paper-literal mode with large r is measurably biased") {
    std::vector<std::vector<double>> obs{{1.0, 6.0}, {1.2, 6.1}, {4.0, 9.5}, {0.9, 5.8}};
    auto run_mode = [&](Blinding blinding, int64_t rlo, int64_t rhi) {
        ProtocolConfig pc = small_config(Mode::lptd1, 4, 2, 3);
        pc.blinding = blinding;
        pc.r_min = rlo;
        pc.r_max = rhi;
        pc.data_abs_bound = 16.0;
        Rig rig(pc, obs, 888);
        rig.run_std();
        std::vector<double> last;
        for (size_t j = 1; j <= 3; ++j) last = rig.run_iteration(j);
        return last;
    };
    auto baseline = run_mode(Blinding::debias, 1024, 65536);
    auto literal = run_mode(Blinding::paper_literal, 1024, 65536);
    double dev = 0;
    for (size_t m = 0; m < baseline.size(); ++m)
        dev = std::max(dev, std::fabs(baseline[m] - literal[m]));
    CHECK(dev > 1e-3);
}

TEST_CASE("lptd2 recovery over subsets equals the surviving sums") {
    ProtocolConfig pc = small_config(Mode::lptd2);
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto reports = rig.reports(Phase::weight, 1);

    SUBCASE("device 1 silent") {
        std::vector<DeviceReport> present{reports[0], reports[2]};
        auto v = rig.fog->verify(Phase::weight, 1, present);
        FogAggregate agg = rig.fog->process(Phase::weight, 1, v);
        CHECK(agg.recovered);
        BlindedSum b = rig.cloud->on_weight_aggregate(agg);
        int64_t expect = rig.devices[0]->dist_units() + rig.devices[2]->dist_units();
        int64_t expect_units = static_cast<int64_t>(std::floor(
            std::log(static_cast<double>(rig.cloud->last_r1()) * static_cast<double>(expect)) *
            static_cast<double>(pc.scale_wt)));
        CHECK(b.units == expect_units);
    }
    SUBCASE("full set: recovery path agrees with the cancellation path") {
        auto v = rig.fog->verify(Phase::weight, 1, reports);
        FogAggregate normal = rig.fog->aggregate(Phase::weight, 1, v.accepted);
        FogAggregate recov = rig.fog->aggregate_recovery(Phase::weight, 1, v.accepted);
        BlindedSum b1 = rig.cloud->on_weight_aggregate(normal);
        // decode both paths to the same distance sum: compare the blinded
        // units after accounting for the fresh r1 draw
        Rig rig2(pc, demo_obs());
        rig2.run_std();
        for (auto& d : rig2.devices) d->on_truth_broadcast(rig2.cloud->truths());
        auto v2 = rig2.fog->verify(Phase::weight, 1, rig2.reports(Phase::weight, 1));
        FogAggregate recov2 = rig2.fog->aggregate_recovery(Phase::weight, 1, v2.accepted);
        BlindedSum b2 = rig2.cloud->on_weight_aggregate(recov2);
        CHECK(b1.units == b2.units);  // same seed, same sum, same r1 stream
        (void)recov;
    }
}

TEST_CASE("device cost per iteration: no exponentiations, 2(M+2) multiplications") {
    ProtocolConfig pc = small_config(Mode::lptd1, 3, 4, 2);
    Rig rig(pc, {{1, 2, 3, 4}, {2, 3, 4, 5}, {0, 1, 2, 3}});
    rig.run_std();
    OpSnapshot before = snapshot(rig.dev_ctr);
    rig.run_iteration(1);
    OpSnapshot delta = snapshot(rig.dev_ctr) - before;
    CHECK(delta.modexp == 0);
    CHECK(delta.modinv == 0);
    // three devices, each 2(M+2) = 12 multiplications
    CHECK(delta.modmul == 3 * 2 * (pc.objects + 2));
}

TEST_CASE("degenerate weights: a single device yields a zero weight sum") {
    ProtocolConfig pc = small_config(Mode::lptd1, 1, 2, 1);
    pc.r_min = pc.r_max = 1;
    Rig rig(pc, {{3.0, 4.0}});
    rig.run_std();
    for (auto& d : rig.devices) d->on_truth_broadcast(rig.cloud->truths());
    auto wagg = rig.fog->process(Phase::weight, 1,
                                 rig.fog->verify(Phase::weight, 1, rig.reports(Phase::weight, 1)));
    BlindedSum b = rig.fog->reblind(rig.cloud->on_weight_aggregate(wagg));
    for (auto& d : rig.devices) d->on_blinded_sum(b);
    auto tagg = rig.fog->process(Phase::truth, 1,
                                 rig.fog->verify(Phase::truth, 1, rig.reports(Phase::truth, 1)));
    auto share = rig.fog->debias_share(1);
    try {
        rig.cloud->on_truth_aggregate(tagg, share);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_weights);
    }
}

TEST_CASE("a full run consumes every chain position") {
    ProtocolConfig pc = small_config(Mode::lptd1, 3, 2, 3);
    Rig rig(pc, demo_obs());
    rig.run_std();
    for (size_t j = 1; j <= pc.iterations; ++j) rig.run_iteration(j);
    for (size_t d = 0; d < pc.devices; ++d)
        CHECK(rig.fog->verifier_position(d) == 2 * pc.iterations);
}

TEST_CASE("std subprotocol: observations 1 and 3 give mean 2, std 1") {
    ProtocolConfig pc = small_config(Mode::lptd1, 2, 1, 1);
    Rig rig(pc, {{1.0}, {3.0}});
    auto a = rig.fog->process(Phase::std_a, 0,
                              rig.fog->verify(Phase::std_a, 0, rig.reports(Phase::std_a, 0)));
    auto means = rig.cloud->on_std_a(a);
    REQUIRE(means.size() == 1);
    CHECK(means[0] == doctest::Approx(2.0).epsilon(1e-4));
    for (auto& d : rig.devices) d->on_mean_broadcast(means);
    auto b = rig.fog->process(Phase::std_b, 0,
                              rig.fog->verify(Phase::std_b, 0, rig.reports(Phase::std_b, 0)));
    auto stds = rig.cloud->on_std_b(b);
    REQUIRE(stds.size() == 1);
    CHECK(stds[0] == doctest::Approx(1.0).epsilon(1e-4));

    SUBCASE("identical observations clamp the deviation at one unit") {
        Rig flat(pc, {{5.0}, {5.0}}, 123);
        auto fa = flat.fog->process(Phase::std_a, 0,
                                    flat.fog->verify(Phase::std_a, 0, flat.reports(Phase::std_a, 0)));
        auto fm = flat.cloud->on_std_a(fa);
        for (auto& d : flat.devices) d->on_mean_broadcast(fm);
        auto fb = flat.fog->process(Phase::std_b, 0,
                                    flat.fog->verify(Phase::std_b, 0, flat.reports(Phase::std_b, 0)));
        auto fs = flat.cloud->on_std_b(fb);
        CHECK(fs[0] == doctest::Approx(1.0 / static_cast<double>(pc.scale_obs)));
    }
}

TEST_CASE("reported distances track the real-valued distances") {
    ProtocolConfig pc = small_config(Mode::lptd1);
    Rig rig(pc, demo_obs());
    rig.run_std();
    std::vector<double> truths = rig.cloud->truths();
    for (auto& d : rig.devices) d->on_truth_broadcast(truths);
    (void)rig.reports(Phase::weight, 1);
    const double unit = 1.0 / static_cast<double>(pc.scale_obs);
    auto obs = demo_obs();
    auto dev = std_pass(ObservationMatrix::continuous(obs));
    for (size_t k = 0; k < obs.size(); ++k) {
        double dist = 0;
        for (size_t m = 0; m < obs[k].size(); ++m) {
            double diff = obs[k][m] - truths[m];
            dist += diff * diff / std::max(dev.std_dev[m], unit);
        }
        double reported = static_cast<double>(rig.devices[k]->dist_units()) * unit;
        // the secure path divides by the quantized deviations, so allow the
        // quantization of both std and the distance itself
        CHECK(std::fabs(reported - dist) <= 16 * unit * (1 + dist));
    }
}

TEST_CASE("initial truths stay inside the observation envelope") {
    Rng rng(5);
    auto init = initial_truths(demo_obs(), rng);
    CHECK(init.size() == 2);
    CHECK(init[0] >= 0.5);
    CHECK(init[0] <= 1.5);
    CHECK(init[1] >= 2.0);
    CHECK(init[1] <= 3.0);
}

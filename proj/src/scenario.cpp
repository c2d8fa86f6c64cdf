#include "lptd/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lptd/bytes.hpp"
#include "lptd/errors.hpp"
#include "lptd/sha256.hpp"

namespace lptd {

using json = nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            raise(Errc::config_error, "unknown field '" + it.key() + "' in " + where);
}

Mode parse_mode(const std::string& s) {
    if (s == "lptd1") return Mode::lptd1;
    if (s == "lptd2") return Mode::lptd2;
    raise(Errc::config_error, "mode must be 'lptd1' or 'lptd2', got '" + s + "'");
}

Blinding parse_blinding(const std::string& s) {
    if (s == "debias") return Blinding::debias;
    if (s == "paper_literal") return Blinding::paper_literal;
    raise(Errc::config_error, "blinding mode must be 'debias' or 'paper_literal', got '" + s + "'");
}

Phase parse_report_phase(const std::string& s) {
    if (s == "weight") return Phase::weight;
    if (s == "truth") return Phase::truth;
    raise(Errc::config_error, "attack phase must be 'weight' or 'truth', got '" + s + "'");
}

AttackKind parse_attack_kind(const std::string& s) {
    if (s == "replay") return AttackKind::replay;
    if (s == "tamper") return AttackKind::tamper;
    if (s == "inject") return AttackKind::inject;
    raise(Errc::config_error, "attack kind must be replay, tamper or inject, got '" + s + "'");
}

bool power_of_ten(int64_t v) {
    if (v < 1) return false;
    while (v % 10 == 0) v /= 10;
    return v == 1;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(Errc::config_error, std::string("scenario JSON parse failure: ") + e.what());
    }
    if (!j.is_object()) raise(Errc::config_error, "scenario file must hold a JSON object");
    expect_keys(j,
                {"name", "seed", "devices", "objects", "iterations", "kappa", "mode", "blinding",
                 "r_min", "r_max", "scale_obs", "scale_wt", "data", "faults", "attacks",
                 "g_preprovisioned", "oracle_comparison"},
                "scenario");

    ScenarioConfig cfg;
    try {
        if (j.contains("name")) cfg.name = j.at("name").get<std::string>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
        cfg.devices = j.at("devices").get<size_t>();
        cfg.objects = j.at("objects").get<size_t>();
        if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<size_t>();
        if (j.contains("kappa")) cfg.kappa = j.at("kappa").get<unsigned>();
        if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
        if (j.contains("blinding"))
            cfg.blinding = parse_blinding(j.at("blinding").get<std::string>());
        if (j.contains("r_min")) cfg.r_min = j.at("r_min").get<int64_t>();
        if (j.contains("r_max")) cfg.r_max = j.at("r_max").get<int64_t>();
        if (j.contains("scale_obs")) cfg.scale_obs = j.at("scale_obs").get<int64_t>();
        if (j.contains("scale_wt")) cfg.scale_wt = j.at("scale_wt").get<int64_t>();
        if (j.contains("g_preprovisioned"))
            cfg.g_preprovisioned = j.at("g_preprovisioned").get<bool>();
        if (j.contains("oracle_comparison"))
            cfg.oracle_comparison = j.at("oracle_comparison").get<bool>();

        if (j.contains("data")) {
            const json& d = j.at("data");
            expect_keys(d,
                        {"model", "truth_low", "truth_high", "sigma", "noise_free_device",
                         "observations"},
                        "data");
            std::string model = d.value("model", std::string("gaussian"));
            if (model == "gaussian") {
                cfg.data.model = DataSpec::Model::gaussian;
                if (d.contains("truth_low")) cfg.data.truth_low = d.at("truth_low").get<double>();
                if (d.contains("truth_high"))
                    cfg.data.truth_high = d.at("truth_high").get<double>();
                if (d.contains("sigma")) {
                    if (d.at("sigma").is_array())
                        cfg.data.sigma = d.at("sigma").get<std::vector<double>>();
                    else
                        cfg.data.sigma_default = d.at("sigma").get<double>();
                }
                if (d.contains("noise_free_device"))
                    cfg.data.noise_free_device = d.at("noise_free_device").get<size_t>();
                if (d.contains("observations"))
                    raise(Errc::config_error, "observations only belong to the explicit model");
            } else if (model == "explicit") {
                cfg.data.model = DataSpec::Model::explicit_matrix;
                cfg.data.observations =
                    d.at("observations").get<std::vector<std::vector<double>>>();
                for (const char* banned : {"truth_low", "truth_high", "sigma",
                                           "noise_free_device"})
                    if (d.contains(banned))
                        raise(Errc::config_error,
                              std::string(banned) + " only belongs to the gaussian model");
            } else {
                raise(Errc::config_error, "data model must be 'gaussian' or 'explicit'");
            }
        }

        if (j.contains("faults")) {
            for (const json& f : j.at("faults")) {
                expect_keys(f, {"device", "iterations"}, "fault");
                FaultSpec fs;
                fs.device = f.at("device").get<size_t>();
                const json& its = f.at("iterations");
                if (its.is_string() && its.get<std::string>() == "all")
                    fs.whole_run = true;
                else if (its.is_array())
                    fs.iterations = its.get<std::vector<size_t>>();
                else
                    raise(Errc::config_error, "fault iterations must be \"all\" or a list");
                cfg.faults.push_back(std::move(fs));
            }
        }
        if (j.contains("attacks")) {
            for (const json& a : j.at("attacks")) {
                expect_keys(a, {"kind", "device", "iteration", "phase"}, "attack");
                AttackSpec as;
                as.kind = parse_attack_kind(a.at("kind").get<std::string>());
                as.device = a.at("device").get<size_t>();
                as.iteration = a.at("iteration").get<size_t>();
                if (a.contains("phase"))
                    as.phase = parse_report_phase(a.at("phase").get<std::string>());
                cfg.attacks.push_back(as);
            }
        }
    } catch (const json::exception& e) {
        raise(Errc::config_error, std::string("scenario field error: ") + e.what());
    }
    return cfg;
}

ScenarioConfig scenario_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) raise(Errc::io_error, "cannot open scenario file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return scenario_from_json_text(ss.str());
}

std::string scenario_canonical_json(const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["devices"] = cfg.devices;
    j["objects"] = cfg.objects;
    j["iterations"] = cfg.iterations;
    j["kappa"] = cfg.kappa;
    j["mode"] = cfg.mode == Mode::lptd1 ? "lptd1" : "lptd2";
    j["blinding"] = cfg.blinding == Blinding::debias ? "debias" : "paper_literal";
    j["r_min"] = cfg.r_min;
    j["r_max"] = cfg.r_max;
    j["scale_obs"] = cfg.scale_obs;
    j["scale_wt"] = cfg.scale_wt;
    j["g_preprovisioned"] = cfg.g_preprovisioned;
    j["oracle_comparison"] = cfg.oracle_comparison;
    json d;
    if (cfg.data.model == DataSpec::Model::gaussian) {
        d["model"] = "gaussian";
        d["truth_low"] = cfg.data.truth_low;
        d["truth_high"] = cfg.data.truth_high;
        if (cfg.data.sigma.empty())
            d["sigma"] = cfg.data.sigma_default;
        else
            d["sigma"] = cfg.data.sigma;
        if (cfg.data.noise_free_device) d["noise_free_device"] = *cfg.data.noise_free_device;
    } else {
        d["model"] = "explicit";
        d["observations"] = cfg.data.observations;
    }
    j["data"] = d;
    json faults = json::array();
    for (const auto& f : cfg.faults) {
        json e;
        e["device"] = f.device;
        if (f.whole_run)
            e["iterations"] = "all";
        else
            e["iterations"] = f.iterations;
        faults.push_back(e);
    }
    j["faults"] = faults;
    json attacks = json::array();
    for (const auto& a : cfg.attacks)
        attacks.push_back({{"kind", attack_kind_name(a.kind)},
                           {"device", a.device},
                           {"iteration", a.iteration},
                           {"phase", phase_name(a.phase)}});
    j["attacks"] = attacks;
    return j.dump();
}

std::string scenario_digest(const ScenarioConfig& cfg) {
    std::string canon = scenario_canonical_json(cfg);
    HashVal h = sha256(reinterpret_cast<const uint8_t*>(canon.data()), canon.size());
    return hash_hex(h).substr(0, 16);
}

void validate_scenario(const ScenarioConfig& cfg) {
    if (cfg.devices < 1) raise(Errc::config_error, "devices must be at least 1");
    if (cfg.objects < 1) raise(Errc::config_error, "objects must be at least 1");
    if (cfg.iterations < 1) raise(Errc::config_error, "iterations must be at least 1");
    if (cfg.kappa < 16) raise(Errc::config_error, "kappa must be at least 16");
    if (!power_of_ten(cfg.scale_obs) || !power_of_ten(cfg.scale_wt))
        raise(Errc::config_error, "scales must be powers of ten");
    if (cfg.r_min < 1 || cfg.r_min > cfg.r_max)
        raise(Errc::config_error, "blinding range must satisfy 1 <= r_min <= r_max");
    if (!cfg.faults.empty() && cfg.mode != Mode::lptd2)
        raise(Errc::config_error, "fault schedules require lptd2 mode");
    if (cfg.g_preprovisioned && cfg.mode != Mode::lptd2)
        raise(Errc::config_error, "g_preprovisioned applies to lptd2 mode only");
    for (const auto& f : cfg.faults) {
        if (f.device >= cfg.devices) raise(Errc::config_error, "fault device index out of range");
        if (!f.whole_run) {
            if (f.iterations.empty())
                raise(Errc::config_error, "fault needs \"all\" or at least one iteration");
            for (size_t it : f.iterations)
                if (it < 1 || it > cfg.iterations)
                    raise(Errc::config_error, "fault iteration out of range");
        }
    }
    for (const auto& a : cfg.attacks) {
        if (a.device >= cfg.devices) raise(Errc::config_error, "attack device index out of range");
        if (a.iteration < 1 || a.iteration > cfg.iterations)
            raise(Errc::config_error, "attack iteration out of range");
        if (a.kind == AttackKind::replay && a.iteration < 2)
            raise(Errc::config_error, "replay needs a prior report; target iteration 2 or later");
        if (a.phase != Phase::weight && a.phase != Phase::truth)
            raise(Errc::config_error, "attacks target the weight or truth phase");
    }
    if (cfg.data.model == DataSpec::Model::gaussian) {
        if (!(cfg.data.truth_low <= cfg.data.truth_high))
            raise(Errc::config_error, "truth_low must not exceed truth_high");
        if (!cfg.data.sigma.empty() && cfg.data.sigma.size() != 1 &&
            cfg.data.sigma.size() != cfg.devices)
            raise(Errc::config_error, "sigma list must have one entry or one per device");
        for (double s : cfg.data.sigma)
            if (s < 0) raise(Errc::config_error, "sigma must be non-negative");
        if (cfg.data.noise_free_device && *cfg.data.noise_free_device >= cfg.devices)
            raise(Errc::config_error, "noise_free_device out of range");
    } else {
        if (cfg.data.observations.size() != cfg.devices)
            raise(Errc::config_error, "explicit observations: row count != devices");
        for (const auto& row : cfg.data.observations)
            if (row.size() != cfg.objects)
                raise(Errc::config_error, "explicit observations: column count != objects");
    }
}

}  // namespace lptd

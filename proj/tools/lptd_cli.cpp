// Command-line front end: key generation, scenario execution, oracle
// verification and benchmark sweeps over the secure truth-discovery pipeline.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include <lptd/errors.hpp>
#include <lptd/paillier.hpp>
#include <lptd/scenario.hpp>
#include <lptd/simnet.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lptd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunError = 1;
constexpr int kExitVerifyFail = 2;
constexpr int kExitConfigError = 3;

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Seed precedence: --seed flag, then the scenario file, then LPTD_SEED.
void resolve_seed(ScenarioConfig& cfg, const std::string& scenario_path,
                  const std::optional<uint64_t>& flag_seed) {
    if (flag_seed) {
        cfg.seed = *flag_seed;
        return;
    }
    std::ifstream f(scenario_path);
    std::stringstream ss;
    ss << f.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    bool file_has_seed = j.is_object() && j.contains("seed");
    if (!file_has_seed) {
        if (const char* env = std::getenv("LPTD_SEED")) cfg.seed = std::stoull(env);
    }
}

std::optional<KeyBundle> maybe_load_keys(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return load_bundle(path);
}

int cmd_keygen(unsigned kappa, uint64_t seed, const std::string& out_path) {
    Rng rng(seed);
    KeyPair kp = kappa == 16 ? keygen_toy(rng) : keygen(kappa, rng);
    KeyBundle kb{kp.pp, kp.mk, split_key(kp.mk, rng)};
    save_bundle(kb, out_path);
    std::cout << "wrote key bundle: " << out_path << " (|n| = "
              << mpz_sizeinbase(kp.pp.n.get_mpz_t(), 2) << " bits)\n";
    return kExitOk;
}

void write_result_files(const ScenarioConfig& cfg, const RunMetrics& m, const fs::path& out_dir,
                        const std::string& started, const std::string& finished) {
    fs::create_directories(out_dir);
    std::string digest = scenario_digest(cfg);

    json record;
    record["digest"] = digest;
    record["config"] = json::parse(scenario_canonical_json(cfg));
    record["metrics"] = json::parse(metrics_to_json(m));
    record["started"] = started;
    record["finished"] = finished;
    record["wall_ms"] = m.wall_ms;
    std::ofstream jf(out_dir / (digest + ".json"));
    if (!jf) raise(Errc::io_error, "cannot write " + (out_dir / (digest + ".json")).string());
    jf << record.dump(2) << "\n";

    std::ofstream cf(out_dir / (digest + ".csv"));
    if (!cf) raise(Errc::io_error, "cannot write " + (out_dir / (digest + ".csv")).string());
    cf << "iteration,rmse_vs_oracle,max_dev_vs_oracle,rmse_vs_planted,"
          "uplink_bits,modmul,modexp,hash,rejections,recoveries\n";
    for (size_t i = 0; i < m.per_iteration.size(); ++i) {
        const auto& st = m.per_iteration[i];
        cf << (i + 1) << ',';
        if (i < m.oracle_rmse.size()) cf << m.oracle_rmse[i];
        cf << ',';
        if (i < m.oracle_max_dev.size()) cf << m.oracle_max_dev[i];
        cf << ',';
        if (i < m.planted_rmse.size()) cf << m.planted_rmse[i];
        cf << ',' << st.device_uplink_bits << ',' << st.ops.modmul << ',' << st.ops.modexp << ','
           << st.ops.hash << ',' << st.rejections << ',' << st.recoveries << "\n";
    }
    std::cout << "results: " << (out_dir / (digest + ".json")).string() << "\n";
    std::cout << "table:   " << (out_dir / (digest + ".csv")).string() << "\n";
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::optional<uint64_t>& seed, const std::string& keys_path) {
    ScenarioConfig cfg = scenario_from_file(scenario_path);
    resolve_seed(cfg, scenario_path, seed);
    validate_scenario(cfg);
    std::string started = iso_timestamp();
    RunMetrics m = run_scenario(cfg, maybe_load_keys(keys_path));
    std::string finished = iso_timestamp();
    write_result_files(cfg, m, out_dir, started, finished);
    if (!m.completed) {
        std::cerr << "run aborted: " << m.error << "\n";
        return kExitRunError;
    }
    std::cout << "completed " << m.iterations_done << " iterations, "
              << m.rejections.size() << " rejections, wall " << m.wall_ms << " ms\n";
    return kExitOk;
}

int cmd_verify(const std::string& scenario_path, const std::optional<uint64_t>& seed,
               const std::string& keys_path, std::optional<double> tolerance) {
    ScenarioConfig cfg = scenario_from_file(scenario_path);
    resolve_seed(cfg, scenario_path, seed);
    validate_scenario(cfg);
    if (!cfg.attacks.empty())
        raise(Errc::config_error, "verify compares against the reference run; remove attacks");
    for (const auto& f : cfg.faults)
        if (!f.whole_run)
            raise(Errc::config_error,
                  "verify supports whole-run faults only (transient faults shift the reference)");
    cfg.oracle_comparison = true;
    double tol = tolerance.value_or(10.0 / static_cast<double>(cfg.scale_obs));

    RunMetrics m = run_scenario(cfg, maybe_load_keys(keys_path));
    if (!m.completed) {
        std::cerr << "run aborted: " << m.error << "\n";
        return kExitRunError;
    }
    if (!m.oracle_compared) {
        std::cerr << "no reference comparison available\n";
        return kExitRunError;
    }
    bool pass = true;
    double worst = 0;
    for (size_t i = 0; i < m.oracle_max_dev.size(); ++i) {
        bool ok = m.oracle_max_dev[i] <= tol;
        pass = pass && ok;
        worst = std::max(worst, m.oracle_max_dev[i]);
        std::cout << "iteration " << (i + 1) << ": max truth deviation " << m.oracle_max_dev[i]
                  << (ok ? "" : "  <-- exceeds tolerance") << "\n";
    }
    std::cout << (pass ? "PASS" : "FAIL") << ": worst deviation " << worst << " vs tolerance "
              << tol << "\n";
    return pass ? kExitOk : kExitVerifyFail;
}

struct SweepSpec {
    size_t lo = 0, hi = 0, step = 1;
};

SweepSpec parse_range(const std::string& text) {
    SweepSpec s;
    char c1 = 0, c2 = 0;
    std::istringstream ss(text);
    if (!(ss >> s.lo >> c1 >> s.hi >> c2 >> s.step) || c1 != ':' || c2 != ':' || s.step == 0 ||
        s.hi < s.lo)
        raise(Errc::config_error, "range must be lo:hi:step with step > 0 and hi >= lo");
    return s;
}

int cmd_bench(const std::string& sweep, const std::string& range_text, size_t devices,
              size_t objects, size_t iterations, unsigned kappa, uint64_t seed,
              const std::string& out_path) {
    if (sweep != "devices" && sweep != "objects")
        raise(Errc::config_error, "sweep must be 'devices' or 'objects'");
    SweepSpec range = parse_range(range_text);

    std::ostringstream table;
    table << "mode,devices,objects,wall_ms,modmul,modexp,hash,recoveries,max_dev_modexp\n";
    bool relations_hold = true;

    for (size_t v = range.lo; v <= range.hi; v += range.step) {
        ScenarioConfig cfg;
        cfg.name = "bench";
        cfg.seed = seed + v;
        cfg.devices = sweep == "devices" ? v : devices;
        cfg.objects = sweep == "objects" ? v : objects;
        cfg.iterations = iterations;
        cfg.kappa = kappa;
        cfg.data.sigma_default = 1.0;

        auto run_point = [&](Mode mode, bool with_fault) {
            ScenarioConfig c = cfg;
            c.mode = mode;
            c.oracle_comparison = false;
            if (with_fault) c.faults.push_back({0, false, {1}});
            return run_scenario(c);
        };
        RunMetrics m1 = run_point(Mode::lptd1, false);
        RunMetrics m2 = run_point(Mode::lptd2, false);
        RunMetrics m2f = run_point(Mode::lptd2, true);

        auto total_exp = [](const RunMetrics& m) {
            return m.ops_fog.modexp + m.ops_cloud.modexp + m.ops_devices.modexp;
        };
        auto emit = [&](const char* mode, const RunMetrics& m) {
            table << mode << ',' << cfg.devices << ',' << cfg.objects << ',' << m.wall_ms << ','
                  << (m.ops_fog.modmul + m.ops_cloud.modmul + m.ops_devices.modmul) << ','
                  << total_exp(m) << ','
                  << (m.ops_fog.hash + m.ops_cloud.hash + m.ops_devices.hash) << ','
                  << m.recovered_aggregates.size() << ',' << m.max_device_modexp_per_iteration
                  << "\n";
        };
        emit("lptd1", m1);
        emit("lptd2", m2);
        emit("lptd2+fault", m2f);

        bool point_ok = m1.max_device_modexp_per_iteration == 0 &&
                        m2.max_device_modexp_per_iteration == 0 &&
                        m2f.max_device_modexp_per_iteration == 0 &&
                        total_exp(m1) <= total_exp(m2) && total_exp(m1) < total_exp(m2f);
        if (!point_ok) relations_hold = false;
    }

    std::cout << table.str();
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) raise(Errc::io_error, "cannot write " + out_path);
        f << table.str();
    }
    std::cout << (relations_hold ? "cost relations hold: lptd1 <= lptd2, strict under recovery\n"
                                 : "COST RELATION VIOLATION\n");
    return relations_hold ? kExitOk : kExitRunError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lptd: privacy-preserving truth discovery simulator"};
    app.require_subcommand(1);

    auto* keygen_cmd = app.add_subcommand("keygen", "generate and serialize a key bundle");
    unsigned kg_kappa = 512;
    uint64_t kg_seed = 1;
    std::string kg_out = "keys.lptd";
    keygen_cmd->add_option("--kappa", kg_kappa, "prime bit length (16 selects the toy instance)");
    keygen_cmd->add_option("--seed", kg_seed, "generator seed");
    keygen_cmd->add_option("--out", kg_out, "output path")->required();

    auto* run_cmd = app.add_subcommand("run", "execute a scenario and persist results");
    std::string run_scenario_path, run_out = "results", run_keys;
    std::optional<uint64_t> run_seed;
    run_cmd->add_option("--scenario", run_scenario_path, "scenario JSON")->required();
    run_cmd->add_option("--out", run_out, "output directory");
    run_cmd->add_option("--seed", run_seed, "seed override");
    run_cmd->add_option("--keys", run_keys, "pre-generated key bundle");

    auto* verify_cmd = app.add_subcommand("verify", "compare the secure pipeline to the reference");
    std::string ver_scenario_path, ver_keys;
    std::optional<uint64_t> ver_seed;
    std::optional<double> ver_tol;
    verify_cmd->add_option("--scenario", ver_scenario_path, "scenario JSON")->required();
    verify_cmd->add_option("--seed", ver_seed, "seed override");
    verify_cmd->add_option("--keys", ver_keys, "pre-generated key bundle");
    verify_cmd->add_option("--tolerance", ver_tol, "max truth deviation (default 10/scale_obs)");

    auto* bench_cmd = app.add_subcommand("bench", "cost sweeps across devices or objects");
    std::string bench_sweep = "devices", bench_range = "10:50:10", bench_out;
    size_t bench_devices = 10, bench_objects = 5, bench_iters = 5;
    unsigned bench_kappa = 64;
    uint64_t bench_seed = 1;
    bench_cmd->add_option("--sweep", bench_sweep, "devices | objects");
    bench_cmd->add_option("--range", bench_range, "lo:hi:step");
    bench_cmd->add_option("--devices", bench_devices, "fixed device count (objects sweep)");
    bench_cmd->add_option("--objects", bench_objects, "fixed object count (devices sweep)");
    bench_cmd->add_option("--iterations", bench_iters, "iterations per run");
    bench_cmd->add_option("--kappa", bench_kappa, "prime bit length");
    bench_cmd->add_option("--seed", bench_seed, "base seed");
    bench_cmd->add_option("--out", bench_out, "also write the table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (*keygen_cmd) return cmd_keygen(kg_kappa, kg_seed, kg_out);
        if (*run_cmd) return cmd_run(run_scenario_path, run_out, run_seed, run_keys);
        if (*verify_cmd) return cmd_verify(ver_scenario_path, ver_seed, ver_keys, ver_tol);
        if (*bench_cmd)
            return cmd_bench(bench_sweep, bench_range, bench_devices, bench_objects, bench_iters,
                             bench_kappa, bench_seed, bench_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::config_error ? kExitConfigError : kExitRunError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRunError;
    }
    return kExitConfigError;
}

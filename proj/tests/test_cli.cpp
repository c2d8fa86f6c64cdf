// Drives the built CLI binary end to end: exit codes, output files, and
// reproducibility. The binary path and bundled scenario directory come in
// through compile definitions.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <lptd/paillier.hpp>
#include <lptd/rng.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
    std::string cmd = std::string(LPTD_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult res;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / ("lptd_cli_test_" + std::to_string(getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string scenario(const std::string& name) {
    return (fs::path(LPTD_SCENARIO_DIR) / name).string();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("keygen writes a reloadable, seed-reproducible bundle") {
    fs::path a = work_dir() / "keys_a.lptd";
    fs::path b = work_dir() / "keys_b.lptd";
    CmdResult r1 = run_cli("keygen --kappa 512 --seed 7 --out " + a.string());
    CHECK(r1.exit_code == 0);
    REQUIRE(fs::exists(a));
    CmdResult r2 = run_cli("keygen --kappa 512 --seed 7 --out " + b.string());
    CHECK(r2.exit_code == 0);
    CHECK(slurp(a) == slurp(b));  // same seed, same bytes

    lptd::KeyBundle kb = lptd::load_bundle(a.string());
    CHECK(mpz_sizeinbase(kb.pp.n.get_mpz_t(), 2) == 1024);
    lptd::Rng rng(5);
    mpz_class m = 123456789;
    CHECK(lptd::decrypt(kb.pp, kb.mk, lptd::encrypt(kb.pp, m, rng)) == m);
}

TEST_CASE("keygen failure names the offending path") {
    std::string bad = "/nonexistent-dir-zzz/keys.lptd";
    CmdResult r = run_cli("keygen --kappa 16 --seed 1 --out " + bad);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("/nonexistent-dir-zzz") != std::string::npos);
}

TEST_CASE("run executes the bundled scenario and persists both outputs") {
    fs::path out = work_dir() / "results";
    CmdResult r = run_cli("run --scenario " + scenario("default.json") + " --out " + out.string());
    CHECK(r.exit_code == 0);
    size_t json_files = 0, csv_files = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.path().extension() == ".json") ++json_files;
        if (e.path().extension() == ".csv") ++csv_files;
    }
    CHECK(json_files == 1);
    REQUIRE(csv_files == 1);
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.path().extension() != ".csv") continue;
        std::string csv = slurp(e.path());
        CHECK(csv.rfind("iteration,rmse_vs_oracle,max_dev_vs_oracle,rmse_vs_planted,"
                        "uplink_bits,modmul,modexp,hash,rejections,recoveries",
                        0) == 0);
        // header plus one row per iteration
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5);
    }
}

TEST_CASE("run results are content-addressed: reruns coexist per digest") {
    fs::path out = work_dir() / "results_multi";
    CmdResult r1 =
        run_cli("run --scenario " + scenario("default.json") + " --out " + out.string());
    CHECK(r1.exit_code == 0);
    CmdResult r2 = run_cli("run --scenario " + scenario("fault_tolerant.json") + " --out " +
                           out.string());
    CHECK(r2.exit_code == 0);
    size_t json_files = 0;
    for (const auto& e : fs::directory_iterator(out))
        if (e.path().extension() == ".json") ++json_files;
    CHECK(json_files == 2);  // digest-distinct names preserve prior results
}

TEST_CASE("seed override yields reproducible tables") {
    fs::path out1 = work_dir() / "seed_a";
    fs::path out2 = work_dir() / "seed_b";
    run_cli("run --scenario " + scenario("default.json") + " --seed 99 --out " + out1.string());
    run_cli("run --scenario " + scenario("default.json") + " --seed 99 --out " + out2.string());
    std::string csv1, csv2;
    for (const auto& e : fs::directory_iterator(out1))
        if (e.path().extension() == ".csv") csv1 = slurp(e.path());
    for (const auto& e : fs::directory_iterator(out2))
        if (e.path().extension() == ".csv") csv2 = slurp(e.path());
    REQUIRE_FALSE(csv1.empty());
    CHECK(csv1 == csv2);
}

TEST_CASE("a fault schedule outside lptd2 is rejected before any run") {
    fs::path bad = work_dir() / "bad_fault.json";
    write_file(bad, R"({"devices": 4, "objects": 2, "iterations": 3, "kappa": 64,
        "mode": "lptd1", "faults": [{"device": 1, "iterations": [2]}]})");
    fs::path out = work_dir() / "never";
    CmdResult r = run_cli("run --scenario " + bad.string() + " --out " + out.string());
    CHECK(r.exit_code == 3);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("unknown scenario fields fail closed") {
    fs::path bad = work_dir() / "bad_field.json";
    write_file(bad, R"({"devices": 4, "objects": 2, "devcies": 9})");
    CmdResult r = run_cli("run --scenario " + bad.string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("devcies") != std::string::npos);
}

TEST_CASE("verify passes the corrected default and fails the literal update") {
    CmdResult good = run_cli("verify --scenario " + scenario("default.json"));
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("PASS") != std::string::npos);

    CmdResult bad = run_cli("verify --scenario " + scenario("paper_literal_bias.json"));
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("FAIL") != std::string::npos);
    CHECK(bad.output.find("worst deviation") != std::string::npos);
}

TEST_CASE("verify with the blinding factor forced to 1 passes in both modes") {
    for (const char* blinding : {"debias", "paper_literal"}) {
        fs::path sc = work_dir() / (std::string("r1_") + blinding + ".json");
        write_file(sc, std::string(R"({"devices": 6, "objects": 3, "iterations": 4,
            "kappa": 64, "mode": "lptd1", "blinding": ")") +
                           blinding + R"(", "r_min": 1, "r_max": 1,
            "data": {"model": "gaussian", "sigma": 1.0}})");
        CmdResult r = run_cli("verify --scenario " + sc.string());
        CHECK(r.exit_code == 0);
    }
}

TEST_CASE("verify refuses attack scenarios") {
    CmdResult r = run_cli("verify --scenario " + scenario("adversary.json"));
    CHECK(r.exit_code == 3);
}

TEST_CASE("verify accepts whole-run fault scenarios against the surviving subset") {
    CmdResult r = run_cli("verify --scenario " + scenario("fault_tolerant.json"));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("attacked runs complete and log the rejections") {
    fs::path out = work_dir() / "attack_results";
    CmdResult r =
        run_cli("run --scenario " + scenario("adversary.json") + " --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("3 rejections") != std::string::npos);
}

TEST_CASE("bench: a trivial sweep emits one point, relations hold") {
    CmdResult r = run_cli("bench --sweep devices --range 8:8:1 --objects 3 --iterations 2 "
                          "--kappa 64 --seed 3");
    CHECK(r.exit_code == 0);
    // header + three rows (lptd1, lptd2, lptd2+fault) + relation line
    CHECK(r.output.find("mode,devices,objects") != std::string::npos);
    CHECK(r.output.find("lptd1,8,3") != std::string::npos);
    CHECK(r.output.find("lptd2,8,3") != std::string::npos);
    CHECK(r.output.find("lptd2+fault,8,3") != std::string::npos);
    CHECK(r.output.find("cost relations hold") != std::string::npos);
}

TEST_CASE("bench range parsing rejects malformed specs") {
    CmdResult r = run_cli("bench --sweep devices --range 10:5:2");
    CHECK(r.exit_code == 3);
}

TEST_CASE("run can reuse a pre-generated key bundle") {
    fs::path keys = work_dir() / "run_keys.lptd";
    CHECK(run_cli("keygen --kappa 128 --seed 11 --out " + keys.string()).exit_code == 0);
    fs::path out = work_dir() / "keyed_results";
    CmdResult r = run_cli("run --scenario " + scenario("default.json") + " --keys " +
                          keys.string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
}

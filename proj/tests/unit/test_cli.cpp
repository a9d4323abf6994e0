#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sevfl/cli.hpp"

using namespace sevfl;
namespace fs = std::filesystem;

namespace {

const std::string kSmoke = std::string(SEVFL_SOURCE_DIR) + "/data/smoke_metrics.csv";

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sevfl_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    CHECK(cli({"run", "--seed", "1"}).code == kExitConfigError);
    CHECK(cli({"run", "--data", kSmoke}).code == kExitConfigError);  // seed is mandatory
    CHECK(cli({"run", "--data", (dir / "missing.csv").string(), "--seed", "1"}).code == kExitDataError);
    CHECK(cli({"run", "--data", kSmoke, "--seed", "1", "--clients", "3"}).code == kExitConfigError);
    CHECK(cli({"run", "--data", kSmoke, "--seed", "1", "--size-ratio", "2"}).code == kExitConfigError);
    CHECK(cli({"run", "--data", kSmoke, "--seed", "1", "--model", "forest"}).code == kExitConfigError);
    CHECK(cli({"run", "--data", kSmoke, "--seed", "1", "--no-such-flag"}).code == kExitConfigError);
    CHECK(cli({}).code == kExitConfigError);
    write(dir / "bad.csv", "a,severity\n1,0\nx,1\n");
    const auto bad = cli({"run", "--data", (dir / "bad.csv").string(), "--seed", "1"});
    CHECK(bad.code == kExitDataError);
    CHECK(bad.err.find("non-numeric") != std::string::npos);
    write(dir / "cfg.json", R"({"data": "x.csv", "seed": 1, "colour": "red"})");
    CHECK(cli({"run", "--config", (dir / "cfg.json").string()}).code == kExitConfigError);
    write(dir / "cfg2.json", R"({"data": "x.csv", "seed": 1, "regime": "centralized", "federation": {"clients": 3}})");
    CHECK(cli({"run", "--config", (dir / "cfg2.json").string()}).code == kExitConfigError);
}

TEST_CASE("identical configs give byte-identical reports; flags override the file") {
    const auto dir = scratch("determinism");
    write(dir / "cfg.json", R"({"data": ")" + kSmoke +
                                R"(", "model": "pac", "regime": "federated", "seed": 7,
                                "federation": {"clients": 3, "rounds": 3, "scheme": "dirichlet", "alpha": 1.0}})");
    const auto a = cli({"run", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()});
    const auto b = cli({"run", "--config", (dir / "cfg.json").string(), "--out", (dir / "b").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a/report.json") == slurp(dir / "b/report.json"));
    CHECK(slurp(dir / "a/rounds.jsonl") == slurp(dir / "b/rounds.jsonl"));
    CHECK(fs::exists(dir / "a/metadata.json"));
    CHECK(fs::exists(dir / "a/report.txt"));
    CHECK(slurp(dir / "a/report.json").find("created_utc") == std::string::npos);

    const auto rep = nlohmann::json::parse(slurp(dir / "a/report.json"));
    CHECK(rep["config"]["federation"]["clients"] == 3);
    CHECK(rep["config"]["federation"]["scheme"] == "dirichlet");
    CHECK(rep["folds"].size() == 5);
    // 5 folds x 3 rounds
    std::istringstream lines(slurp(dir / "a/rounds.jsonl"));
    int n = 0;
    for (std::string l; std::getline(lines, l);) ++n;
    CHECK(n == 15);

    const auto c = cli({"run", "--config", (dir / "cfg.json").string(), "--rounds", "2", "--out", (dir / "c").string()});
    REQUIRE(c.code == 0);
    CHECK(nlohmann::json::parse(slurp(dir / "c/report.json"))["config"]["federation"]["rounds"] == 2);
}

TEST_CASE("the echoed config reproduces the report") {
    const auto dir = scratch("echo");
    REQUIRE(cli({"run", "--data", kSmoke, "--seed", "3", "--model", "boosted", "--regime", "synthetic",
                 "--n-rounds", "5", "--max-depth", "3", "--out", (dir / "a").string()})
                .code == 0);
    const auto first = nlohmann::json::parse(slurp(dir / "a/report.json"));
    write(dir / "echo.json", first["config"].dump());
    REQUIRE(cli({"run", "--config", (dir / "echo.json").string(), "--out", (dir / "b").string()}).code == 0);
    CHECK(slurp(dir / "a/report.json") == slurp(dir / "b/report.json"));
}

TEST_CASE("output directory falls back to the environment variable") {
    const auto dir = scratch("env");
    ::setenv(kOutputDirEnv, (dir / "from_env").string().c_str(), 1);
    const auto r = cli({"run", "--data", kSmoke, "--seed", "1", "--model", "svm"});
    ::unsetenv(kOutputDirEnv);
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "from_env/report.json"));
}

TEST_CASE("synth writes a reproducible CSV and a fidelity report") {
    const auto dir = scratch("synth");
    const auto a = cli({"synth", "--data", kSmoke, "--seed", "5", "--out", (dir / "a.csv").string()});
    const auto b = cli({"synth", "--data", kSmoke, "--seed", "5", "--out", (dir / "b.csv").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(load_dataset(dir / "a.csv").class_counts() == load_dataset(kSmoke).class_counts());
    const auto fid = nlohmann::json::parse(slurp(dir / "a.csv.fidelity.json"));
    CHECK(fid.contains("max_ks"));
    CHECK(cli({"synth", "--data", kSmoke, "--out", (dir / "c.csv").string()}).code == kExitConfigError);
}

TEST_CASE("table merges regimes and injects baselines") {
    const auto dir = scratch("table");
    const std::string base = "--data=" + kSmoke;
    REQUIRE(cli({"run", base, "--seed", "2", "--model", "svm", "--out", (dir / "c").string()}).code == 0);
    REQUIRE(cli({"run", base, "--seed", "2", "--model", "svm", "--regime", "federated", "--rounds", "2", "--out",
                 (dir / "f").string()})
                .code == 0);
    REQUIRE(cli({"run", base, "--seed", "2", "--model", "svm", "--regime", "synthetic", "--out", (dir / "s").string()})
                .code == 0);
    const auto t = cli({"table", (dir / "s/report.json").string(), (dir / "c/report.json").string(),
                        (dir / "f/report.json").string(), "--baseline", "Baseline Model:f1=0.54,mcc=0.21", "--csv",
                        (dir / "t.csv").string()});
    REQUIRE(t.code == 0);
    // One model row with three regime groups, centralized first.
    const auto c = t.out.find("centralized"), f = t.out.find("federated (iid)"), s = t.out.find("synthetic");
    CHECK(c < f);
    CHECK(f < s);
    CHECK(t.out.find("Baseline Model |    0.54   0.21") != std::string::npos);
    const auto csv = slurp(dir / "t.csv");
    CHECK(csv.find("model,centralized:f1_weighted") == 0);

    auto doctored = nlohmann::json::parse(slurp(dir / "c/report.json"));
    doctored["summary"].erase("gmean");
    write(dir / "doctored.json", doctored.dump());
    CHECK(cli({"table", (dir / "f/report.json").string(), (dir / "doctored.json").string()}).code == kExitDataError);
    CHECK(cli({"table", (dir / "c/report.json").string(), "--baseline", "nonsense"}).code == kExitConfigError);
}

TEST_CASE("baseline parsing") {
    const auto b = parse_baseline("Baseline Model:f1=0.54,mcc=0.21");
    CHECK(b.name == "Baseline Model");
    CHECK(b.values.at("f1_weighted") == 0.54);
    CHECK(b.values.at("mcc") == 0.21);
    CHECK_THROWS_AS(parse_baseline("X:auc=0.5"), ConfigError);
}

TEST_CASE("inspect summarizes a dataset") {
    const auto r = cli({"inspect", kSmoke, "--folds", "5"});
    CHECK(r.code == 0);
    CHECK(r.out.find("rows: 400") != std::string::npos);
    CHECK(r.out.find("fold 4") != std::string::npos);
}

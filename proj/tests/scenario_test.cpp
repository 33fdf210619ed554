#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ek/error.hpp"
#include "ek/experiments.hpp"
#include "ek/scenario.hpp"

using namespace ek::scenario;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kMinimal = R"({"schema_version": 1, "experiment": "run",
  "grid": {"dim": 1, "n": 64, "L_over_pi": 16},
  "diagnostics": {"snapshots": {"t_end": 2, "count": 3}}})";

std::string with(const std::string& patch) {
    json j = json::parse(kMinimal);
    j.merge_patch(json::parse(patch));
    return j.dump();
}

std::string config_message(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ek::ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ek_scenario_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int ekctl(const std::string& args, const std::string& env = "") {
    std::string cmd = env + " " + EKCTL_PATH + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Parse, DefaultsAreEchoed) {
    auto sc = parse_scenario(kMinimal);
    EXPECT_EQ(sc.kind, ExperimentKind::run);
    EXPECT_EQ(sc.n, 64);
    auto r = json::parse(sc.resolved_json);
    EXPECT_DOUBLE_EQ(r["integrator"]["dt"].get<double>(), 0.05);
    EXPECT_EQ(r["model"]["capillarity"], "quantum");
    EXPECT_EQ(r["initial"]["profile"], "gaussian");
    EXPECT_EQ(r["diagnostics"]["norms"].size(), 2u);
    EXPECT_EQ(r["params"]["energy_level"], 0);
    EXPECT_EQ(sc.integrator.snapshot_times, (std::vector<double>{0.0, 1.0, 2.0}));
}

TEST(Parse, UnknownKeysAreRejectedWithPointer) {
    EXPECT_NE(config_message(with(R"({"grid": {"bogus": 1}})")).find("/grid/bogus"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"extra": 1})")).find("/extra"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"params": {"nope": 1}})")).find("/params/nope"), std::string::npos);
}

TEST(Parse, SyntaxErrorsCarryLineAndColumn) {
    std::string msg = config_message("{\n  \"schema_version\": 1,\n  \"experiment\" \"run\"\n}");
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
}

TEST(Parse, TypeAndRangeErrors) {
    EXPECT_NE(config_message(with(R"({"grid": {"n": "big"}})")).find("/grid/n"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"grid": {"n": 63}})")).find("/grid/n"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"experiment": "fly"})")).find("fly"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"schema_version": 2})")).find("/schema_version"), std::string::npos);
    EXPECT_NE(config_message(with(R"({"diagnostics": {"norms": ["l0.5"]}})")).find("norm"), std::string::npos);
}

TEST(Parse, RandomProfileNeedsSeed) {
    std::string msg = config_message(with(R"({"initial": {"profile": "random_band_limited"}})"));
    EXPECT_NE(msg.find("/initial/seed"), std::string::npos) << msg;
    EXPECT_NO_THROW(parse_scenario(with(R"({"initial": {"profile": "random_band_limited", "seed": 3}})")));
}

TEST(Parse, SeedOverrideReachesRandomFields) {
    auto sc = parse_scenario(with(R"({"initial": {"profile": "random_band_limited", "seed": 3}})"));
    const auto h = scenario_hash(sc);
    apply_seed_override(sc, 99);
    EXPECT_EQ(sc.seed, 99u);
    EXPECT_EQ(sc.initial.seed, 99u);
    EXPECT_NE(scenario_hash(sc), h);
}

TEST(Catalog, ListsEightKinds) {
    const auto& cat = experiment_catalog();
    EXPECT_EQ(cat.size(), 8u);
    for (const char* k : {"run", "dispersion-test", "resonance-scan", "multiplier-fit", "normalform-check",
                          "energy-drift", "madelung-compare", "scatter-probe"})
        EXPECT_EQ(kind_name(parse_kind(k)), k);
}

TEST(Validate, StabilityCondition) {
    auto sc = parse_scenario(with(R"({"model": {"coeff": -2}})"));
    EXPECT_THROW(validate(sc), ek::StabilityViolation);
}

TEST(Validate, WrapWindowWarning) {
    auto sc = parse_scenario(with(R"({"integrator": {"dt": 400}, "diagnostics": {"snapshots": {"t_end": 400, "count": 2}}})"));
    auto rep = validate(sc);
    ASSERT_FALSE(rep.warnings.empty());
    EXPECT_NE(rep.warnings.front().find("wrap-around"), std::string::npos);
}

TEST(Validate, AmplitudeGuardAndVacuum) {
    EXPECT_THROW(validate(parse_scenario(with(R"({"initial": {"amplitude": 0.3}})"))), ek::ConfigError);
    EXPECT_THROW(validate(parse_scenario(with(R"({"initial": {"amplitude": 0.9}, "integrator": {"amplitude_guard": 0}})"))),
                 ek::ConfigError);
}

TEST(Run, ManifestAndDeterminism) {
    auto sc = parse_scenario(with(R"({"initial": {"profile": "random_band_limited", "seed": 5}})"), "inline");
    auto a = scratch("det_a"), b = scratch("det_b");
    auto ma = ek::experiments::run_scenario(sc, {a, 1});
    auto mb = ek::experiments::run_scenario(sc, {b, 1});
    EXPECT_EQ(ma.exit_code(), 0);
    EXPECT_EQ(slurp(a / "timeseries.csv"), slurp(b / "timeseries.csv"));
    auto man = json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(man["status"], "pass");
    EXPECT_EQ(man["scenario"]["experiment"], "run");
    EXPECT_EQ(man["resolved"]["initial"]["seed"], 5);
    EXPECT_EQ(man["files"].size(), 2u);
    EXPECT_EQ(man["tool"]["version"], ek::experiments::version());
}

TEST(Run, RuntimeErrorIsCaptured) {
    // the order ladder rescales the initial state, which is impossible from zero
    auto sc = parse_scenario(with(R"({"experiment": "normalform-check", "initial": {"amplitude": 0},
                                      "params": {"checks": ["order"]}})"));
    auto out = scratch("err");
    auto m = ek::experiments::run_scenario(sc, {out, 1});
    EXPECT_EQ(m.exit_code(), 3);
    EXPECT_TRUE(fs::exists(out / "failure.json"));
}

TEST(Cli, ExitCodes) {
    const std::string dir = EK_SCENARIO_DIR;
    auto out = scratch("cli");
    EXPECT_EQ(ekctl("list"), 0);
    EXPECT_EQ(ekctl(""), 2);
    EXPECT_EQ(ekctl("run"), 2);
    EXPECT_EQ(ekctl("run --scenario /nonexistent.json"), 2);
    EXPECT_EQ(ekctl("validate --scenario " + dir + "/normalform_1d.json"), 0);
    EXPECT_EQ(ekctl("validate", "EK_SCENARIO=" + dir + "/normalform_1d.json"), 0);

    std::ofstream(out / "unstable.json") << with(R"({"model": {"coeff": -1}})");
    EXPECT_EQ(ekctl("validate --scenario " + (out / "unstable.json").string()), 2);

    std::ofstream(out / "failing.json")
        << with(R"({"experiment": "normalform-check", "params": {"checks": ["order"], "remainder_slope": 7}})");
    EXPECT_EQ(ekctl("run --scenario " + (out / "failing.json").string() + " --out " + (out / "f").string()), 1);

    std::ofstream(out / "broken.json")
        << with(R"({"experiment": "normalform-check", "initial": {"amplitude": 0}, "params": {"checks": ["order"]}})");
    EXPECT_EQ(ekctl("run --scenario " + (out / "broken.json").string() + " --out " + (out / "b").string()), 3);

    EXPECT_EQ(ekctl("run --scenario " + dir + "/normalform_1d.json --threads 2",
                    "EK_OUT=" + (out / "env").string() + " EK_SEED_OVERRIDE=17"),
              0);
    auto man = json::parse(slurp(out / "env" / "manifest.json"));
    EXPECT_EQ(man["resolved"]["seed"], 17);
    EXPECT_EQ(man["threads"], 2);
}

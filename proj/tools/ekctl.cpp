#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ek/error.hpp"
#include "ek/experiments.hpp"
#include "ek/scenario.hpp"

namespace {

enum Exit { kPass = 0, kAssertFail = 1, kUsage = 2, kRuntime = 3 };

struct Options {
    std::string scenario;
    std::string out = "out";
    int threads = 1;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
};

ek::scenario::Scenario load(const Options& o) {
    auto sc = ek::scenario::load_scenario(o.scenario);
    if (o.has_seed_override) ek::scenario::apply_seed_override(sc, o.seed_override);
    return sc;
}

void print_report(const ek::scenario::ValidationReport& rep) {
    for (const auto& n : rep.notes) std::cout << "note: " << n << '\n';
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_list() {
    for (const auto& e : ek::scenario::experiment_catalog()) {
        std::printf("%-18s %s\n", e.name.c_str(), e.summary.c_str());
    }
    return kPass;
}

int cmd_validate(const Options& o) {
    auto sc = load(o);
    print_report(ek::scenario::validate(sc));
    std::cout << "ok: " << sc.name << " (" << ek::scenario::kind_name(sc.kind) << ")\n";
    return kPass;
}

int cmd_run(const Options& o) {
    auto sc = load(o);
    print_report(ek::scenario::validate(sc));
    ek::experiments::RunOptions ro;
    ro.out_dir = o.out;
    ro.threads = o.threads;
    auto man = ek::experiments::run_scenario(sc, ro);
    for (const auto& a : man.assertions) {
        const char* tag = a.passed ? "PASS" : a.best_effort ? "WARN" : "FAIL";
        std::printf("%s  %-44s %.10g  (%s)\n", tag, a.name.c_str(), a.value, a.expectation.c_str());
    }
    for (const auto& w : man.warnings) std::cerr << "warning: " << w << '\n';
    if (!man.error.empty()) {
        std::cerr << "error [" << man.error_kind << "]: " << man.error << '\n'
                  << "diagnostics: " << (ro.out_dir / "failure.json").string() << '\n';
    }
    std::printf("%s in %.2fs, manifest %s\n", man.exit_code() == 0 ? "passed" : man.exit_code() == 1 ? "failed" : "error",
                man.wall_seconds, (ro.out_dir / "manifest.json").c_str());
    return man.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Euler-Korteweg small-data experiments"};
    app.set_version_flag("--version", ek::experiments::version());
    app.require_subcommand(1);

    Options o;
    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "scenario file (JSON)")->envname("EK_SCENARIO")->required();
        sub->add_option("--seed-override", o.seed_override, "replace the scenario seed")
            ->envname("EK_SEED_OVERRIDE")
            ->each([&](const std::string&) { o.has_seed_override = true; });
    };

    auto* run = app.add_subcommand("run", "run a scenario and write CSVs plus manifest.json");
    add_scenario(run);
    run->add_option("--out", o.out, "output directory")->envname("EK_OUT")->capture_default_str();
    run->add_option("--threads", o.threads, "worker threads for block scans")
        ->envname("EK_THREADS")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();

    auto* val = app.add_subcommand("validate", "check a scenario without running it");
    add_scenario(val);

    auto* lst = app.add_subcommand("list", "list experiment kinds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kPass : kUsage;
    }

    try {
        if (lst->parsed()) return cmd_list();
        if (val->parsed()) return cmd_validate(o);
        return cmd_run(o);
    } catch (const ek::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ek::StabilityViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const ek::Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}

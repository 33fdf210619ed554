// Runs the shipped scenarios and judges each acceptance criterion against
// tolerances pinned here, independent of the thresholds inside the scenarios.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ek/experiments.hpp"
#include "ek/scenario.hpp"

namespace fs = std::filesystem;
using ek::experiments::RunManifest;

namespace {

struct Options {
    fs::path out = "acceptance_out";
    int threads = 0;
    std::vector<int> only;
};

struct Verdict {
    enum Kind { pass, fail, warn } kind = pass;
    std::string detail;
};

std::map<std::string, RunManifest> g_runs;
Options g_opts;

const RunManifest& run(const std::string& scenario) {
    auto it = g_runs.find(scenario);
    if (it != g_runs.end()) return it->second;
    auto sc = ek::scenario::load_scenario(fs::path(EK_SCENARIO_DIR) / (scenario + ".json"));
    ek::experiments::RunOptions ro{g_opts.out / scenario, g_opts.threads};
    return g_runs[scenario] = ek::experiments::run_scenario(sc, ro);
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// value of a named assertion; NaN (and a note) when the run errored or the name is missing
double value(const RunManifest& m, const std::string& name, std::string& notes) {
    if (!m.error.empty()) {
        notes += " [" + m.scenario_name + " error: " + m.error + "]";
        return std::nan("");
    }
    const auto* a = m.find(name);
    if (!a) {
        notes += " [missing " + name + "]";
        return std::nan("");
    }
    return a->value;
}

struct Judge {
    bool ok = true;
    std::string detail;
    void within(const std::string& label, double v, double target, double tol) {
        bool good = std::abs(v - target) <= tol;
        ok = ok && good;
        detail += " " + label + "=" + num(v) + (good ? "" : "(!)") + " [" + num(target) + "±" + num(tol) + "]";
    }
    void at_most(const std::string& label, double v, double bound) {
        bool good = v <= bound;
        ok = ok && good;
        detail += " " + label + "=" + num(v) + (good ? "" : "(!)") + " [<=" + num(bound) + "]";
    }
    void at_least(const std::string& label, double v, double bound) {
        bool good = v >= bound;
        ok = ok && good;
        detail += " " + label + "=" + num(v) + (good ? "" : "(!)") + " [>=" + num(bound) + "]";
    }
    void runtime(const RunManifest& m, double limit) { at_most(m.scenario_name + ".seconds", m.wall_seconds, limit); }
    Verdict verdict() const { return {ok ? Verdict::pass : Verdict::fail, detail}; }
};

Verdict criterion1() {
    Judge j;
    std::string notes;
    const auto& a = run("dispersion_1d");
    const auto& b = run("dispersion_2d");
    j.within("slope_d1", value(a, "decay_slope_linf", notes), -0.5, 0.07);
    j.within("slope_d2", value(b, "decay_slope_linf", notes), -1.0, 0.07);
    j.runtime(a, 60.0);
    j.runtime(b, 600.0);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion2() {
    Judge j;
    std::string notes;
    const auto& m = run("energy_drift_1d");
    j.at_most("linear_energy_rel", value(m, "linear_energy_conservation", notes), 1e-12);
    j.at_most("mass_drift_per_time", value(m, "mass_drift_per_unit_time", notes), 1e-8);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion3() {
    Judge j;
    std::string notes;
    const auto& m = run("normalform_1d");
    j.at_most("max_residual", value(m, "symbol_identity_max_residual", notes), 1e-12);
    auto sc = ek::scenario::load_scenario(fs::path(EK_SCENARIO_DIR) / "normalform_1d.json");
    std::string p = sc.params_json;
    auto pos = p.find("\"identity_samples\":");
    double samples = pos == std::string::npos ? 0.0 : std::stod(p.substr(pos + 19));
    j.at_least("samples", samples, 1e5);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion4() {
    Judge j;
    std::string notes;
    const auto& m = run("normalform_1d");
    const double t = value(m, "transformed_zero_mode", notes);
    const double u = value(m, "untransformed_zero_mode_ratio", notes);
    j.at_most("transformed", t, 1e-12);
    j.at_least("untransformed", u, 1e3 * std::max(t, 1e-12));
    j.detail += notes;
    return j.verdict();
}

Verdict criterion5() {
    Judge j;
    std::string notes;
    const auto& m = run("normalform_1d");
    j.within("nonlinearity_slope", value(m, "nonlinearity_order", notes), 2.0, 0.05);
    j.within("remainder_slope", value(m, "remainder_order", notes), 3.0, 0.1);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion6() {
    Judge j;
    std::string notes;
    const auto& m = run("resonance_scan");
    j.at_least("pp_product_constant", value(m, "omega_pp_product_constant", notes), 1e-300);
    j.at_least("mm_min_joint", value(m, "omega_mm_joint_positive_off_origin", notes), 1e-300);
    const auto* mono = m.find("omega_mm_joint_positive_off_origin");
    if (!mono || !mono->passed) {
        j.ok = false;
        j.detail += " mm_minima_not_monotone(!)";
    }
    j.within("mm_reference", value(m, "omega_mm_reference", notes), 1.434877, 1e-6);
    j.within("mp_slice_slope", value(m, "omega_mp_slice_slope", notes), 1.0, 0.1);
    j.at_most("parallel_rel_err", value(m, "parallel_resonance_relative_error", notes), 0.05);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion7() {
    Judge j;
    std::string notes;
    const auto& m = run("multiplier_fit");
    const std::pair<const char*, double> expected[] = {
        {"B3_small_M_vary_l_exponent_l", -0.5}, {"B3_small_M_vary_M_exponent_M", -1.0},
        {"B3_large_M_vary_l_exponent_l", 0.5},  {"B3_large_M_vary_M_exponent_M", 0.0},
        {"B1_small_M_vary_l_exponent_l", 0.5},  {"B1_small_M_vary_M_exponent_M", 0.0},
        {"B2_small_M_vary_l_exponent_l", -0.5}, {"B2_small_M_vary_M_exponent_M", -1.0},
    };
    for (const auto& [name, target] : expected) j.within(name, value(m, name, notes), target, 0.15);
    j.runtime(m, 600.0);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion8() {
    Judge j;
    std::string notes;
    const auto& m = run("madelung_1d");
    j.at_most("l2_difference_t5", value(m, "madelung_l2_difference", notes), 1e-4);
    j.runtime(m, 60.0);
    j.detail += notes;
    return j.verdict();
}

Verdict criterion9() {
    Judge j;
    std::string notes;
    const auto& m = run("scatter_3d");
    j.at_most("variation_rate", value(m, "cauchy_variation_rate", notes), -0.4);
    j.runtime(m, 1800.0);
    auto it = m.measurements.find("variation_rate_stderr");
    if (it != m.measurements.end()) j.detail += " stderr=" + num(it->second);
    j.detail += notes;
    Verdict v = j.verdict();
    if (v.kind == Verdict::fail) v.kind = Verdict::warn;  // best-effort criterion
    return v;
}

std::map<std::string, std::string> csv_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream f(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        out[e.path().filename().string()] = ss.str();
    }
    return out;
}

Verdict criterion10() {
    Judge j;
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(EK_SCENARIO_DIR))
        if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    int identical = 0;
    for (const auto& n : names) {
        run(n);
        auto first = csv_bytes(g_opts.out / n);
        auto sc = ek::scenario::load_scenario(fs::path(EK_SCENARIO_DIR) / (n + ".json"));
        // a different thread count must not change anything either
        ek::experiments::RunOptions ro{g_opts.out / (n + "_repeat"), std::max(1, g_opts.threads / 2)};
        ek::experiments::run_scenario(sc, ro);
        auto second = csv_bytes(ro.out_dir);
        if (!first.empty() && first == second) {
            ++identical;
        } else {
            j.ok = false;
            j.detail += " " + n + "(!)";
        }
    }
    j.detail += " identical=" + std::to_string(identical) + "/" + std::to_string(names.size());
    return j.verdict();
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--out" && i + 1 < argc) g_opts.out = argv[++i];
        else if (a == "--threads" && i + 1 < argc) g_opts.threads = std::stoi(argv[++i]);
        else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) g_opts.only.push_back(std::stoi(tok));
        } else {
            std::fprintf(stderr, "usage: acceptance [--out dir] [--threads n] [--only 1,2,...]\n");
            return 2;
        }
    }
    if (g_opts.threads <= 0) g_opts.threads = static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u));
    fs::create_directories(g_opts.out);

    const std::vector<std::function<Verdict()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                            criterion6, criterion7, criterion8, criterion9, criterion10};
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!g_opts.only.empty() && std::find(g_opts.only.begin(), g_opts.only.end(), id) == g_opts.only.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i]();
        } catch (const std::exception& e) {
            v = {Verdict::fail, std::string(" exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = v.kind == Verdict::pass ? "PASS" : v.kind == Verdict::warn ? "WARN" : "FAIL";
        std::printf("criterion %2d: %s (%.1fs)%s\n", id, tag, secs, v.detail.c_str());
        std::fflush(stdout);
        if (v.kind == Verdict::fail) ++failures;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

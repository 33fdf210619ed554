#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ek/scenario.hpp"

namespace ek::experiments {

struct Assertion {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string expectation;  // human-readable bound, e.g. "|slope + 0.5| <= 0.07"
    bool best_effort = false; // failure is reported as a warning
};

struct RunOptions {
    std::filesystem::path out_dir = "out";
    int threads = 1;
};

struct RunManifest {
    std::string scenario_name;
    std::string experiment;
    std::string origin;
    std::uint64_t scenario_hash = 0;
    std::string version;
    std::string started;  // UTC, ISO 8601
    double wall_seconds = 0.0;
    int threads = 1;
    std::vector<std::string> files;
    std::vector<Assertion> assertions;
    std::map<std::string, double> measurements;  // supplementary numbers, not asserted
    std::vector<std::string> warnings;
    std::string error;       // runtime failure message, empty on success
    std::string error_kind;

    bool passed() const;
    // 0 pass, 1 assertion failure, 3 runtime error
    int exit_code() const;
    const Assertion* find(const std::string& name) const;
};

std::string version();

// Executes the scenario's experiment, writes CSVs and manifest.json under opts.out_dir.
// Runtime errors are captured in the manifest (and failure.json), not thrown.
RunManifest run_scenario(const scenario::Scenario& sc, const RunOptions& opts);

std::string manifest_json(const RunManifest& m, const scenario::Scenario& sc);

}  // namespace ek::experiments

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ek/model.hpp"
#include "ek/propagator.hpp"
#include "ek/spectral.hpp"

namespace ek::scenario {

constexpr int kSchemaVersion = 1;

enum class ExperimentKind {
    run,
    dispersion_test,
    resonance_scan,
    multiplier_fit,
    normalform_check,
    energy_drift,
    madelung_compare,
    scatter_probe,
};

struct ExperimentInfo {
    ExperimentKind kind;
    std::string name;
    std::string summary;
};
const std::vector<ExperimentInfo>& experiment_catalog();
ExperimentKind parse_kind(const std::string& name);
std::string kind_name(ExperimentKind k);

struct ModelSpec {
    double rho_c = 1.0;
    std::string capillarity = "quantum";  // quantum | constant
    double kappa = 1.0;
    double K0 = 1.0;
    std::string pressure = "power";       // power
    double coeff = 2.0;
    double gamma = 1.0;
    double rho_lo = 0.5;  // admissible interval, relative to rho_c
    double rho_hi = 2.0;
};

struct InitialSpec {
    // gaussian | wave_packet | random_band_limited | bilaplacian_gaussian | zero
    std::string profile = "gaussian";
    double amplitude = 1e-3;      // peak of l
    double phi_amplitude = 0.0;   // peak of φ (same shape)
    double width = 3.0;
    std::vector<double> center;   // defaults to the box centre
    std::vector<double> wavevector;
    double band = 1.0;
    std::uint64_t seed = 0;
};

struct Scenario {
    int schema_version = kSchemaVersion;
    std::string name;
    ExperimentKind kind = ExperimentKind::run;
    std::uint64_t seed = 0;
    ModelSpec model;
    int dim = 1;
    int n = 256;
    double L = 0.0;
    InitialSpec initial;
    propagator::IntegratorConfig integrator;
    std::vector<std::string> norms;  // linf, l2, l4, h1, ...
    std::string params_json;         // kind-specific block, defaults filled in
    std::string resolved_json;       // whole scenario, defaults filled in
    std::string origin;
};

// Throws ConfigError with a JSON pointer (or line:column for syntax errors).
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::filesystem::path& path);
void apply_seed_override(Scenario& sc, std::uint64_t seed);

model::ModelParams build_model(const Scenario& sc);
spectral::Grid build_grid(const Scenario& sc);
// ψ̂ of the initial state, Fourier space
spectral::Field build_initial(const Scenario& sc, const model::ModelParams& p);
spectral::NormKind parse_norm(const std::string& name);

std::uint64_t scenario_hash(const Scenario& sc);

struct ValidationReport {
    std::vector<std::string> warnings;
    std::vector<std::string> notes;
};
// Schema is checked by parse_scenario; this adds physical consistency checks.
// Throws StabilityViolation / ConfigError; soft problems become warnings.
ValidationReport validate(const Scenario& sc);

}  // namespace ek::scenario

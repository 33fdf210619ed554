#pragma once

#include <stdexcept>
#include <string>

namespace ek {

// Base for every library error; `kind` is a short stable tag usable in manifests.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error("invalid_argument", w) {}
};

struct StabilityViolation : Error {
    explicit StabilityViolation(const std::string& w) : Error("stability_violation", w) {}
};

struct VacuumProximity : Error {
    explicit VacuumProximity(const std::string& w) : Error("vacuum_proximity", w) {}
};

struct NonFinite : Error {
    explicit NonFinite(const std::string& w) : Error("non_finite", w) {}
};

struct AmplitudeGuard : Error {
    explicit AmplitudeGuard(const std::string& w) : Error("amplitude_guard", w) {}
};

struct ConvergenceFailure : Error {
    explicit ConvergenceFailure(const std::string& w) : Error("convergence_failure", w) {}
};

struct NormalFormDivergence : Error {
    explicit NormalFormDivergence(const std::string& w) : Error("normal_form_divergence", w) {}
};

struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& w) : Error("degenerate_input", w) {}
};

struct GridTooLarge : Error {
    explicit GridTooLarge(const std::string& w) : Error("grid_too_large", w) {}
};

// Scenario parse or validation failure; `where` is a JSON pointer or line:column.
struct ConfigError : Error {
    ConfigError(const std::string& where, const std::string& w) : Error("config", where + ": " + w) {}
};

}  // namespace ek

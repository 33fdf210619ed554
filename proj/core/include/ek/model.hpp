#pragma once

#include <functional>
#include <string>
#include <utility>

#include "ek/spectral.hpp"

namespace ek::model {

using spectral::Field;

struct CapillarityLaw {
    enum class Label { quantum, constant, custom };
    Label label = Label::quantum;
    double kappa = 1.0;  // quantum: K = kappa/ρ
    double K0 = 1.0;     // constant: K = K0
    std::function<double(double)> K;
    std::function<double(double)> Kp;
};

CapillarityLaw quantum_capillarity(double kappa);
CapillarityLaw constant_capillarity(double K0);
CapillarityLaw custom_capillarity(std::function<double(double)> K, std::function<double(double)> Kp);

struct PressureLaw {
    enum class Label { power, custom };
    Label label = Label::power;
    double coeff = 1.0;
    double gamma = 1.0;
    std::function<double(double)> g;
    std::function<double(double)> gp;
    std::function<double(double)> gpp;  // optional; enables the closed-form g̃″(1)
};

// g(ρ) = coeff·(ρ^γ − ρ_c^γ)
PressureLaw power_pressure(double coeff, double gamma, double rho_c);
PressureLaw custom_pressure(std::function<double(double)> g, std::function<double(double)> gp);

struct Scales {
    double time = 1.0;
    double space = 1.0;
    double potential = 1.0;
};

struct ModelParams {
    double rho_c = 1.0;
    CapillarityLaw capillarity;
    PressureLaw pressure;
    double alpha = 0.0;          // ã′(1)
    double gtilde_second = 0.0;  // g̃″(1)
    bool normalized = false;
    Scales scales;            // factors applied by the last normalize() call
    double k_factor = 1.0;    // K = k_factor·capillarity.K
    double g_factor = 1.0;    // g = g_factor·pressure.g
    double rho_min = 0.5;     // admissible interval
    double rho_max = 2.0;

    double K(double rho) const { return k_factor * capillarity.K(rho); }
    double Kp(double rho) const { return k_factor * capillarity.Kp(rho); }
    double g(double rho) const { return g_factor * pressure.g(rho); }
    double gp(double rho) const { return g_factor * pressure.gp(rho); }
};

// Raw parameters on the admissible interval [lo·ρ_c, hi·ρ_c]; derived constants filled in.
ModelParams make_params(double rho_c, CapillarityLaw cap, PressureLaw pres,
                        double lo = 0.5, double hi = 2.0);

// Rescales time, space and potential so that a(ρ_c) = 1 and g̃′(1) = 2.
ModelParams normalize(const ModelParams& raw);

double ell_of_rho(const ModelParams& p, double rho);
double rho_of_ell(const ModelParams& p, double L);
// Same without the range check; callers validate the range once per field.
double rho_of_ell_unchecked(const ModelParams& p, double L);
// dℒ/dρ = √(K/ρ)
double ell_prime(const ModelParams& p, double rho);
double sound_coefficient_a(const ModelParams& p, double rho);
double a_of_ell(const ModelParams& p, double L);
double gtilde(const ModelParams& p, double L);
double gtilde_prime(const ModelParams& p, double L);
double alpha_of(const ModelParams& p);
double gtilde_second_of(const ModelParams& p);

// ℒ image of the admissible interval.
std::pair<double, double> ell_range(const ModelParams& p);

struct StateBundle {
    Field rho;  // physical
    Field u;    // physical, dim components
    Field phi;  // physical, zero mean
    Field l;    // physical
    Field psi;  // Fourier
    bool zero_mode_flag = false;
};

StateBundle to_analytic(const ModelParams& p, const Field& rho, const Field& phi);
StateBundle from_analytic(const ModelParams& p, const Field& psi);

// Ψ = √ρ·exp(i·factor·φ) with factor = 1/(2√κ), κ = ρK(ρ) for the quantum law.
double madelung_phase_factor(const ModelParams& p);
Field madelung_wavefunction(const ModelParams& p, const StateBundle& b);

struct CriticalExponents {
    double strauss;
    double quasilinear;
};
CriticalExponents critical_exponents(int d);

std::string describe(const ModelParams& p);

}  // namespace ek::model

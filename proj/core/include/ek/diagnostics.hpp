#pragma once

#include <vector>

#include "ek/model.hpp"
#include "ek/propagator.hpp"
#include "ek/spectral.hpp"

namespace ek::diagnostics {

using spectral::Field;

struct EnergyLevel {
    int m = 0;
    double gradient_term = 0.0;  // ∫ φ_m² |Δ^m z|², z = ∇φ + i∇l
    double density_term = 0.0;   // 2∫ (φ_m²/a) |Δ^m l|²
};

struct EnergyReport {
    double t = 0.0;
    std::vector<EnergyLevel> levels;
    double total = 0.0;
};

// E_n with gauge weights φ_m = a^m(ρ)√ρ.
EnergyReport modified_energy(const model::ModelParams& p, const model::StateBundle& b, int n, double t = 0.0);

struct XNormConfig {
    int N = 6;
    int k = 3;
    double eps = 0.01;
    double p = 0.0;  // 0: from 1/p = 1/2 − 1/d − ε
};

struct NormSnapshot {
    double t = 0.0;
    double hN = 0.0;
    double weighted = 0.0;
    double wkp_scaled = 0.0;  // ⟨t⟩^{1+3ε}‖ψ‖_{W^{k,p}}
    int N = 0, k = 0;
    double p = 0.0, eps = 0.0;
    double total() const { return hN + weighted + wkp_scaled; }
};

double x_norm_exponent(int dim, double eps);
NormSnapshot x_norm_snapshot(const Field& psi, double t, const XNormConfig& cfg);

// ‖D_ξ f̃‖ with f̃ = e^{−itH}ψ̂ and D the centred difference on the periodic lattice.
// On the torus this equals ‖(sin(Δk·x)/Δk) e^{−itH}ψ‖_{L²} exactly (Δk = 2π/L).
double weighted_profile_norm(const Field& psi, double t);

struct DecayWindow {
    double t_min = 5.0;
    double t_max = 0.0;               // 0: up to the wrap-around limit
    double velocity_threshold = 1e-3; // spectral support used for the group velocity
};

struct DecayFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double t_min = 0.0, t_max = 0.0;
    double wrap_limit = 0.0;  // L/(2·v_max)
    std::size_t points = 0;
};

// Wrap-around limit L/(2 v_max) with v_max the largest H′ over the support of ψ̂.
double wrap_around_limit(const Field& psi, double velocity_threshold = 1e-3);

DecayFit decay_fit(const propagator::Trajectory& traj, const spectral::NormKind& kind, const DecayWindow& w);

Field scattering_profile(const Field& psi, double t);
double cauchy_variation(const propagator::Trajectory& traj, double t1, double t2, double s);

// ∫(ρ − ρ_c) dx
double mass(const model::ModelParams& p, const Field& psi);

}  // namespace ek::diagnostics

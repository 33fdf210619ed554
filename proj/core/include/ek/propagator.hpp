#pragma once

#include <functional>
#include <vector>

#include "ek/model.hpp"
#include "ek/spectral.hpp"
#include "ek/symbols.hpp"

namespace ek::propagator {

using spectral::Field;
using spectral::Grid;

struct FlaggedField {
    Field field;
    bool zero_mode_flag = false;  // input zero mode exceeded 1e−12 and was discarded
};

Field apply_U(const Field& f);
FlaggedField apply_U_inv(const Field& f);
Field apply_H(const Field& f);

// e^{itH} coefficientwise.
Field linear_propagate(const Field& psi, double t);

// max over the lattice of H′(|ξ|)
double group_velocity_bound(const Grid& g);
// max of H′ over modes carrying |ψ̂| > threshold·max|ψ̂|
double group_velocity_bound(const Field& psi, double threshold);

// Σ (2+|ξ|²)|ψ̂|² times the cell volume
double linear_energy(const Field& psi);

struct NonlinearTerms {
    Field N1;  // physical, real
    Field N2;  // physical, real
};

// Real and imaginary parts of 𝒩 before the U multiplier, from ψ̂.
NonlinearTerms nonlinear_terms(const model::ModelParams& p, const Field& psi,
                               double dealias_fraction = 2.0 / 3.0, double amplitude_guard = 0.0);
// 𝒩(ψ) = U𝒩₁ + i𝒩₂ in Fourier space
Field nonlinearity(const model::ModelParams& p, const Field& psi, double dealias_fraction = 2.0 / 3.0,
                   double amplitude_guard = 0.0);

enum class Scheme { strang_splitting, exponential_rk4 };

struct IntegratorConfig {
    Scheme scheme = Scheme::exponential_rk4;
    double dt = 0.01;
    double dealias_fraction = 2.0 / 3.0;
    std::vector<double> snapshot_times;
    double amplitude_guard = 0.25;  // abort when ‖l‖∞ exceeds it; 0 disables
    bool nonlinear = true;
};

Field step(const model::ModelParams& p, const IntegratorConfig& cfg, const Field& psi, double dt);

struct Snapshot {
    double t;
    Field psi;
};
using Trajectory = std::vector<Snapshot>;

Trajectory evolve(const model::ModelParams& p, const IntegratorConfig& cfg, const Field& psi0);

// Perturbation u = Ψ/√ρ_c − 1 of the defocusing Gross–Pitaevskii flow
//   i u_t + Δu − 2 Re u = u² + 2|u|² + |u|²u.
// The linear part is diagonalized by w = U·Im u + i·Re u, which obeys w_t = iHw;
// the zero mode is advanced separately (Re u₀ fixed, Im u₀ drifts by −2t·Re u₀).
Field gp_linear_propagate(const Field& u, double t);
Field gp_nonlinearity(const Field& u, double dealias_fraction = 2.0 / 3.0);
Field gp_reference_step(const IntegratorConfig& cfg, const Field& u, double dt);
Trajectory gp_evolve(const IntegratorConfig& cfg, const Field& u0);

}  // namespace ek::propagator

#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "ek/model.hpp"
#include "ek/spectral.hpp"

namespace ek::normalform {

using spectral::cplx;
using spectral::Field;
using spectral::Vec3;

struct BilinearSymbol {
    std::function<cplx(const Vec3& eta, const Vec3& zeta)> eval;
    bool symmetric = true;
    std::string label;
};

struct NormalFormParams {
    double alpha = 0.0;
    BilinearSymbol B;
};

// B(η,ζ) = (α−1)·η·ζ / (2(2+|η|²+|ζ|²)); vanishes identically at α = 1.
BilinearSymbol normal_form_symbol(double alpha);
NormalFormParams make_params(double alpha);
BilinearSymbol constant_symbol(cplx c);

// |2B(η,ζ)(2+|η|²+|ζ|²) + (1−α)η·ζ|
double symbol_identity_residual(double alpha, const Vec3& eta, const Vec3& zeta);

constexpr std::size_t kExactModeLimit = std::size_t{1} << 16;

// (B[f,g])^(ξ) = Σ_η B(η, ξ−η) f̂(η) ĝ(ξ−η), ξ−η restricted to the band (no wrap-around).
// Normalized so that B ≡ 1 reproduces the pointwise product under the unitary transform.
Field bilinear_apply(const BilinearSymbol& B, const Field& f, const Field& g);

// l₁ = l − B[φ,φ] + B[l,l]; all fields Fourier, φ and l real in physical space.
Field forward(const NormalFormParams& nf, const Field& phi, const Field& l);

struct InverseResult {
    Field l;
    int iterations = 0;
    double last_step = 0.0;
};
// Fixed point l ← l₁ + B[φ,φ] − B[l,l]; throws NormalFormDivergence on non-contraction.
InverseResult inverse(const NormalFormParams& nf, const Field& phi, const Field& l1, double tol = 1e-14,
                      int max_iter = 200);

// Fourier coefficients of (φ, l) from ψ̂ = Uφ + il.
void split_state(const Field& psi, Field& phi, Field& l);

// z = Uφ + i l₁ from ψ = Uφ + i l
Field transform_state(const NormalFormParams& nf, const Field& psi);

// Quadratic part of the transformed system, Q(z), Fourier in and out.
Field quadratic_Q(const model::ModelParams& p, const NormalFormParams& nf, const Field& z,
                  double dealias_fraction = 2.0 / 3.0);

// Exact ∂ₜz along the nonlinear flow ∂ₜψ = iHψ + 𝒩(ψ), chain rule through the change of variable.
Field time_derivative_z(const model::ModelParams& p, const NormalFormParams& nf, const Field& psi,
                        double dealias_fraction = 2.0 / 3.0);

// ∂ₜz − iHz − Q(z)
Field remainder(const model::ModelParams& p, const NormalFormParams& nf, const Field& psi,
                double dealias_fraction = 2.0 / 3.0);

// Quadratic part of the l-equation, Fourier: untransformed −∇φ·∇l − αlΔφ evaluated on (φ, l),
// transformed −α div(l₁∇φ) evaluated on (φ, l₁).
Field l_equation_quadratic(double alpha, const Field& phi, const Field& l, bool transformed,
                           double dealias_fraction = 2.0 / 3.0);

}  // namespace ek::normalform

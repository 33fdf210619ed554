#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ek/error.hpp"
#include "ek/model.hpp"
#include "ek/normalform.hpp"
#include "ek/propagator.hpp"

using namespace ek::normalform;
using ek::spectral::Space;

namespace {

Field real_gaussian(const ek::spectral::Grid& g, double amp, double w, double shift = 0.0) {
    Field f = Field::zeros(g, Space::physical);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.x(i)[0] - 0.5 * g.L - shift;
        f.values[i] = amp * std::exp(-x * x / (2 * w * w));
    }
    return ek::spectral::to_fourier(f);
}

double l2(const Field& f) { return ek::spectral::norm(f, ek::spectral::NormKind::lp(2)); }

ek::model::ModelParams model(bool quantum) {
    auto cap = quantum ? ek::model::quantum_capillarity(1.0) : ek::model::constant_capillarity(1.0);
    return ek::model::normalize(ek::model::make_params(1.0, cap, ek::model::power_pressure(2.0, 1.0, 1.0)));
}

}  // namespace

TEST(Symbol, IdentityHoldsOnRandomSamples) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        Vec3 e{U(rng), U(rng), U(rng)}, z{U(rng), U(rng), U(rng)};
        worst = std::max(worst, symbol_identity_residual(U(rng), e, z));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Symbol, ClosedFormValues) {
    auto B = normal_form_symbol(0.0);
    // (α−1)·η·ζ / (2(2+|η|²+|ζ|²)) at η = (1,0,0), ζ = (2,1,0): −2/(2·8)
    EXPECT_NEAR(B.eval({1, 0, 0}, {2, 1, 0}).real(), -0.125, 1e-16);
    EXPECT_TRUE(B.symmetric);
    auto B1 = normal_form_symbol(1.0);
    EXPECT_EQ(B1.eval({1, 2, 3}, {-1, 0.5, 2}), cplx(0.0));
}

TEST(Bilinear, UnitSymbolIsPointwiseProduct) {
    auto g = ek::spectral::make_grid(1, 64, 40.0);
    Field f = real_gaussian(g, 1.0, 3.0), h = real_gaussian(g, 0.5, 4.0, 2.0);
    Field fh = ek::spectral::dealias(f, 0.5), hh = ek::spectral::dealias(h, 0.5);
    Field a = bilinear_apply(constant_symbol(1.0), fh, hh);
    Field b = ek::spectral::product(fh, hh, 1.0);
    EXPECT_LT(l2(ek::spectral::add(a, b, -1.0)), 1e-14);
}

TEST(Bilinear, RejectsOversizedGrid) {
    auto g = ek::spectral::make_grid(3, 64, 40.0);
    Field f = Field::zeros(g, Space::fourier);
    EXPECT_THROW(bilinear_apply(constant_symbol(1.0), f, f), ek::Error);
}

TEST(Transform, InverseRecoversState) {
    auto nf = make_params(0.5);
    auto g = ek::spectral::make_grid(1, 64, 40.0);
    Field phi = real_gaussian(g, 0.05, 3.0), l = real_gaussian(g, 0.03, 2.0, 1.0);
    phi.values[0] = 0.0;
    Field l1 = forward(nf, phi, l);
    auto inv = inverse(nf, phi, l1);
    EXPECT_LT(l2(ek::spectral::add(inv.l, l, -1.0)), 1e-14);
    EXPECT_GT(inv.iterations, 1);
}

TEST(Transform, ZeroModeIsCancelled) {
    for (bool q : {true, false}) {
        auto p = model(q);
        auto nf = make_params(p.alpha);
        auto g = ek::spectral::make_grid(1, 128, 32 * M_PI);
        Field phi = real_gaussian(g, 1e-3, 3.0, 1.0), l = real_gaussian(g, 1e-3, 3.0);
        phi.values[0] = 0.0;
        Field l1 = forward(nf, phi, l);
        double transformed = std::abs(l_equation_quadratic(nf.alpha, phi, l1, true).values[0]);
        double raw = std::abs(l_equation_quadratic(nf.alpha, phi, l, false).values[0]);
        EXPECT_LE(transformed, 1e-15);
        EXPECT_GT(raw, 1e3 * std::max(transformed, 1e-15));
    }
}

TEST(Remainder, CubicInAmplitude) {
    auto p = model(false);
    auto nf = make_params(p.alpha);
    auto g = ek::spectral::make_grid(1, 128, 32 * M_PI);
    auto rem = [&](double a) {
        Field psi = ek::propagator::apply_U(real_gaussian(g, a, 3.0, 2.0));
        psi.values[0] = 0.0;
        ek::spectral::axpy(psi, cplx(0, 1), real_gaussian(g, a, 3.0));
        return l2(remainder(p, nf, psi));
    };
    EXPECT_NEAR(std::log(rem(1e-2) / rem(1e-3)) / std::log(10.0), 3.0, 0.02);
}

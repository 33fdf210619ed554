#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ek/error.hpp"
#include "ek/model.hpp"
#include "ek/propagator.hpp"

using namespace ek::propagator;
using ek::spectral::cplx;
using ek::spectral::Field;
using ek::spectral::Space;

namespace {

Field gaussian_state(const ek::spectral::Grid& g, double amp, double phi_amp, double w) {
    Field l = Field::zeros(g, Space::physical), phi = l;
    const double c = 0.5 * g.L;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.x(i);
        double r2 = 0.0;
        for (int d = 0; d < g.dim; ++d) r2 += (x[d] - c) * (x[d] - c);
        l.values[i] = amp * std::exp(-r2 / (2 * w * w));
        phi.values[i] = phi_amp * std::exp(-r2 / (2 * w * w));
    }
    Field phih = ek::spectral::to_fourier(phi);
    phih.values[0] = 0.0;
    Field psi = apply_U(phih);
    ek::spectral::axpy(psi, cplx(0, 1), ek::spectral::to_fourier(l));
    return psi;
}

double dist(const Field& a, const Field& b) {
    return ek::spectral::norm(ek::spectral::add(a, b, -1.0), ek::spectral::NormKind::lp(2));
}

ek::model::ModelParams qmodel() {
    return ek::model::normalize(ek::model::make_params(1.0, ek::model::quantum_capillarity(1.0),
                                                       ek::model::power_pressure(2.0, 1.0, 1.0)));
}

}  // namespace

TEST(Symbols, ValuesAgainstHighPrecision) {
    EXPECT_NEAR(symbol_H(0.5), 0.75, 1e-16);
    EXPECT_NEAR(symbol_H(1.0), 1.7320508075688772935, 1e-15);
    EXPECT_NEAR(symbol_H(3.0), 9.9498743710661995473, 1e-14);
    EXPECT_NEAR(symbol_H_prime(0.5), 1.6666666666666666667, 1e-15);
    EXPECT_NEAR(symbol_H_prime(1.0), 2.309401076758503058, 1e-15);
    EXPECT_NEAR(symbol_H_prime(3.0), 6.0302268915552724529, 1e-14);
    EXPECT_NEAR(symbol_H_second(0.5), 0.96296296296296296296, 1e-15);
    EXPECT_NEAR(symbol_H_second(1.0), 1.5396007178390020387, 1e-15);
    EXPECT_NEAR(symbol_H_second(3.0), 1.973528800872634621, 1e-14);
}

TEST(Symbols, FactorizationOfH) {
    for (double r = 0.01; r < 50.0; r *= 1.3) {
        // H = |ξ|²/U and U·U⁻¹ = 1
        EXPECT_NEAR(symbol_H(r) * symbol_U(r), r * r, 1e-12 * r * r);
        EXPECT_NEAR(symbol_U(r) * symbol_U_inv(r), 1.0, 1e-14);
    }
    EXPECT_EQ(symbol_U_inv(0.0), 0.0);
}

TEST(Linear, GroupPropertyAndUnitarity) {
    auto g = ek::spectral::make_grid(2, 32, 20.0);
    Field psi = gaussian_state(g, 1e-2, 5e-3, 2.0);
    Field a = linear_propagate(linear_propagate(psi, 1.3), 2.1);
    Field b = linear_propagate(psi, 3.4);
    EXPECT_LT(dist(a, b), 1e-15);
    EXPECT_LT(dist(linear_propagate(b, -3.4), psi), 1e-15);
    const double e0 = linear_energy(psi);
    for (double t : {0.5, 10.0, 1e3}) EXPECT_NEAR(linear_energy(linear_propagate(psi, t)), e0, 1e-13 * e0);
}

TEST(Linear, UInverseFlagsZeroMode) {
    auto g = ek::spectral::make_grid(1, 16, 5.0);
    Field f = Field::zeros(g, Space::fourier);
    f.values[0] = 1.0;
    f.values[3] = 0.5;
    auto r = apply_U_inv(apply_U(f));
    EXPECT_FALSE(r.zero_mode_flag);
    EXPECT_NEAR(std::abs(r.field.values[3] - 0.5), 0.0, 1e-15);
    EXPECT_EQ(r.field.values[0], cplx(0.0));
    EXPECT_TRUE(apply_U_inv(f).zero_mode_flag);
}

TEST(Linear, GroupVelocityBound) {
    auto g = ek::spectral::make_grid(1, 64, 20.0);
    EXPECT_NEAR(group_velocity_bound(g), symbol_H_prime(g.k_max()), 1e-12);
    Field psi = gaussian_state(g, 1e-3, 0.0, 3.0);
    EXPECT_LT(group_velocity_bound(psi, 1e-3), group_velocity_bound(g));
}

TEST(Evolve, LinearModeMatchesExactGroup) {
    auto p = qmodel();
    auto g = ek::spectral::make_grid(1, 128, 40.0);
    Field psi = gaussian_state(g, 1e-3, 1e-3, 3.0);
    IntegratorConfig cfg;
    cfg.nonlinear = false;
    cfg.dt = 0.1;
    cfg.snapshot_times = {0.0, 1.0, 2.5};
    for (auto scheme : {Scheme::exponential_rk4, Scheme::strang_splitting}) {
        cfg.scheme = scheme;
        auto traj = evolve(p, cfg, psi);
        ASSERT_EQ(traj.size(), 3u);
        for (const auto& s : traj) EXPECT_LT(dist(s.psi, linear_propagate(psi, s.t)), 1e-15);
    }
}

TEST(Evolve, FourthOrderConvergence) {
    auto p = qmodel();
    auto g = ek::spectral::make_grid(1, 64, 30.0);
    Field psi = gaussian_state(g, 0.05, 0.05, 2.0);
    auto run = [&](double dt, Scheme s) {
        IntegratorConfig cfg;
        cfg.scheme = s;
        cfg.dt = dt;
        cfg.snapshot_times = {1.0};
        return evolve(p, cfg, psi).back().psi;
    };
    Field ref = run(0.005, Scheme::exponential_rk4);
    double e1 = dist(run(0.1, Scheme::exponential_rk4), ref);
    double e2 = dist(run(0.05, Scheme::exponential_rk4), ref);
    EXPECT_GT(std::log2(e1 / e2), 3.5);
    double s1 = dist(run(0.1, Scheme::strang_splitting), ref);
    double s2 = dist(run(0.05, Scheme::strang_splitting), ref);
    EXPECT_NEAR(std::log2(s1 / s2), 2.0, 0.3);
}

TEST(Evolve, NonlinearityIsQuadraticInAmplitude) {
    auto p = qmodel();
    auto g = ek::spectral::make_grid(1, 128, 40.0);
    auto mag = [&](double a) {
        return ek::spectral::norm(nonlinearity(p, gaussian_state(g, a, a, 3.0)), ek::spectral::NormKind::lp(2));
    };
    EXPECT_NEAR(std::log(mag(1e-3) / mag(1e-4)) / std::log(10.0), 2.0, 1e-3);
}

TEST(Evolve, AmplitudeGuardAborts) {
    auto p = qmodel();
    auto g = ek::spectral::make_grid(1, 64, 30.0);
    IntegratorConfig cfg;
    cfg.amplitude_guard = 0.1;
    cfg.snapshot_times = {0.1};
    EXPECT_THROW(evolve(p, cfg, gaussian_state(g, 0.2, 0.0, 3.0)), ek::AmplitudeGuard);
}

TEST(GrossPitaevskii, LinearPartIsUnitaryOnDiagonalVariable) {
    auto g = ek::spectral::make_grid(1, 64, 30.0);
    Field u = Field::zeros(g, Space::physical);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.x(i)[0] - 15.0;
        u.values[i] = cplx(1e-3 * std::exp(-x * x / 4), 2e-3 * std::exp(-x * x / 9));
    }
    Field uh = ek::spectral::to_fourier(u);
    Field a = gp_linear_propagate(gp_linear_propagate(uh, 0.7), 1.1);
    EXPECT_LT(dist(a, gp_linear_propagate(uh, 1.8)), 1e-16);
}

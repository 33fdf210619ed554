#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ek/error.hpp"
#include "ek/resonance.hpp"
#include "ek/symbols.hpp"

using namespace ek::resonance;

namespace {
const PhaseSpec kPP{1, 1}, kPM{1, -1}, kMP{-1, 1}, kMM{-1, -1};
const Vec3 kXi{0.7, -0.3, 0.2}, kEta{0.25, 0.4, -0.1};
}  // namespace

TEST(Phase, ValuesAgainstHighPrecision) {
    EXPECT_NEAR(phase(kPP, kXi, kEta), 3.4705449075316595339, 1e-14);
    EXPECT_NEAR(phase(kPM, kXi, kEta), 0.51940529714383513347, 1e-14);
    EXPECT_NEAR(phase(kMP, kXi, kEta), 2.0296337374729358931, 1e-14);
    EXPECT_NEAR(phase(kMM, kXi, kEta), -0.92150587291488850735, 1e-14);
}

TEST(Phase, MinusMinusReferencePoint) {
    EXPECT_NEAR(std::abs(phase(kMM, {2, 0, 0}, {1, 0, 0})), 1.4348778704286016093, 1e-14);
}

TEST(Phase, CancellationFreeNearParallelResonance) {
    // H(ξ) − H(η) + H(ξ−η) with |ξ| ≪ |η| ≪ 1
    double v = phase(kMP, {1e-6, 0, 0}, {1e-3, 0, 0});
    EXPECT_NEAR(v / -1.0595992910787494701e-12, 1.0, 1e-9);
}

TEST(Phase, LabelsRoundTrip) {
    for (const char* s : {"++", "+-", "-+", "--"}) EXPECT_EQ(parse_phase(s).label(), s);
    EXPECT_THROW(parse_phase("+"), ek::InvalidArgument);
}

TEST(Phase, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (const auto& ph : {kPP, kPM, kMP, kMM}) {
        for (int k = 0; k < 50; ++k) {
            Vec3 xi{U(rng), U(rng), U(rng)}, eta{U(rng), U(rng), U(rng)};
            Vec3 g = grad_eta(ph, xi, eta);
            for (int i = 0; i < 3; ++i) {
                const double h = 1e-6;
                Vec3 up = eta, dn = eta;
                up[i] += h;
                dn[i] -= h;
                EXPECT_NEAR(g[i], (phase(ph, xi, up) - phase(ph, xi, dn)) / (2 * h), 1e-6);
            }
        }
    }
}

TEST(Phase, PlusPlusProductLowerBound) {
    double c = product_bound_constant(3, 20000, 1e-3, 1e2, 0);
    EXPECT_GT(c, 0.0);
    // the bound cannot exceed its value at ξ = η = r e₁ (ζ = 0): 2H(r)/(2r(1+2r))
    const double r = 1.0;
    EXPECT_LE(c, 2 * ek::propagator::symbol_H(r) / (2 * r * (1 + 2 * r)) + 1e-12);
}

TEST(Phase, ParallelResonanceAsymptotics) {
    auto a = parallel_resonance_check(0.1, 0.01);
    EXPECT_NEAR(a.lhs, -9.5457605766404284189e-8, 1e-20);
    EXPECT_NEAR(a.relative_error, 0.10001706195657931496, 1e-9);
    auto q = quadratic_phase_check(0.1, 0.01);
    EXPECT_NEAR(q.relative_error, 0.1, 1e-12);
}

TEST(Scan, MinusMinusVanishesOnlyAtOrigin) {
    ScanConfig cfg;
    cfg.samples = 4000;
    double prev = 0.0;
    for (double r : {0.25, 0.5, 1.0}) {
        auto rep = resonant_scan(kMM, r, cfg);
        EXPECT_GT(rep.min_joint.value, prev);
        prev = rep.min_joint.value;
        EXPECT_LE(rep.min_gradient.value, rep.min_joint.value);
        EXPECT_LE(rep.min_phase.value, rep.min_joint.value);
    }
}

TEST(Scan, SliceKeepsXiOnSphere) {
    ScanConfig cfg;
    cfg.mode = ScanMode::slice;
    cfg.samples = 2000;
    cfg.eta_min = 0.5;
    auto rep = resonant_scan(kMP, 0.3, cfg);
    for (const auto* p : {&rep.min_phase, &rep.min_gradient, &rep.min_joint}) {
        EXPECT_NEAR(p->xi[0], 0.3, 1e-15);
        double n = std::sqrt(p->eta[0] * p->eta[0] + p->eta[1] * p->eta[1] + p->eta[2] * p->eta[2]);
        EXPECT_GE(n, 0.5 - 1e-12);
        EXPECT_LE(n, 2.0 + 1e-12);
    }
}

TEST(Scan, Deterministic) {
    ScanConfig cfg;
    cfg.samples = 2000;
    cfg.seed = 42;
    auto a = resonant_scan(kPM, 0.7, cfg), b = resonant_scan(kPM, 0.7, cfg);
    EXPECT_EQ(a.min_joint.value, b.min_joint.value);
    EXPECT_EQ(a.min_joint.eta, b.min_joint.eta);
}

TEST(Scan, RejectsBadInput) {
    ScanConfig cfg;
    EXPECT_THROW(resonant_scan(kPP, 0.0, cfg), ek::InvalidArgument);
    cfg.samples = 10;
    EXPECT_THROW(resonant_scan(kPP, 1.0, cfg), ek::InvalidArgument);
}

TEST(Fit, LogLogExactPowerLaw) {
    std::vector<double> x{1, 2, 4, 8, 16}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -1.25));
    auto f = loglog_fit(x, y);
    EXPECT_NEAR(f.slope, -1.25, 1e-14);
    EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-13);
    EXPECT_NEAR(f.stderr_slope, 0.0, 1e-13);
    EXPECT_THROW(loglog_fit({1, 2}, {1, -1}), ek::InvalidArgument);
}

TEST(Cases, WeightsFormPartition) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int k = 0; k < 2000; ++k) {
        Vec3 xi{U(rng), U(rng), U(rng)}, eta{U(rng), U(rng), U(rng)};
        auto w = case_weights(xi, eta, 1.0);
        double s = 0.0;
        for (double v : w) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Cases, ClassifyAndDegenerate) {
    // |η| ∼ |ξ| ≫ |ξ−η|
    EXPECT_EQ(classify_case({1, 0, 0}, {1.01, 0, 0}), 1);
    EXPECT_THROW(classify_case({1, 0, 0}, {1, 0, 0}), ek::DegenerateInput);
    EXPECT_THROW(classify_case({0, 0, 0}, {1, 0, 0}), ek::DegenerateInput);
}

TEST(Blocks, Admissibility) {
    EXPECT_TRUE(admissible({1, 1, 0.01}));
    EXPECT_FALSE(admissible({1, 0.01, 0.01}));
    DyadicBlock b{0.5, 2.0, 1.75};
    EXPECT_EQ(b.M(), 2.0);
    EXPECT_EQ(b.m(), 0.5);
    EXPECT_THROW(block_norm({}, {1, 0.01, 0.01}, 1.0), ek::InvalidArgument);
}

TEST(Blocks, ConstantSymbolVolumeScaling) {
    // ‖1_{block}‖_{Ḣ^s} ∼ l^{d/2 − s} along a ladder that only shrinks the smallest side
    SymbolUnderTest sym;
    sym.constant = true;
    NormConfig cfg;
    cfg.xi_samples = 1;
    std::vector<DyadicBlock> ladder;
    for (int k = 4; k <= 7; ++k) ladder.push_back({1.0 / 16, 1.0 / 16 / std::pow(2.0, k), 1.0 / 16});
    auto f1 = fit_exponents(sym, ladder, 1.0, cfg, 2);
    EXPECT_TRUE(f1.fitted_l);
    EXPECT_NEAR(f1.exponent_l, 0.5, 0.05);
    auto f0 = fit_exponents(sym, ladder, 0.0, cfg, 2);
    EXPECT_NEAR(f0.exponent_l, 1.5, 0.05);
}

TEST(Blocks, ThreadCountDoesNotChangeResults) {
    SymbolUnderTest sym;
    sym.region = Region::time_nonresonant;
    NormConfig cfg;
    cfg.xi_samples = 1;
    std::vector<DyadicBlock> ladder;
    for (int k = 4; k <= 7; ++k) ladder.push_back({1.0 / 16, 1.0 / 16 / std::pow(2.0, k), 1.0 / 16});
    auto a = fit_exponents(sym, ladder, 1.0, cfg, 1);
    auto b = fit_exponents(sym, ladder, 1.0, cfg, 4);
    EXPECT_EQ(a.norms, b.norms);
    EXPECT_EQ(a.exponent_l, b.exponent_l);
}

TEST(Blocks, ZeroMultiplierIsZero) {
    SymbolUnderTest sym;
    sym.multiplier = Multiplier::zero;
    EXPECT_EQ(block_norm(sym, {1, 1, 0.25}, 1.0), 0.0);
}

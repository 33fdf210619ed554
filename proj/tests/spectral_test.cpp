#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ek/error.hpp"
#include "ek/spectral.hpp"

using namespace ek::spectral;

namespace {

Field physical(const Grid& g, auto&& f) {
    Field out = Field::zeros(g, Space::physical);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.x(i));
    return out;
}

double max_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace

TEST(Grid, WavenumbersAndMirror) {
    auto g = make_grid(2, 8, 2.0 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(g.dk(), 1.0);
    EXPECT_EQ(g.signed_index(3), 3);
    EXPECT_EQ(g.signed_index(4), -4);
    EXPECT_EQ(g.signed_index(7), -1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto a = g.xi(i), b = g.xi(g.mirror(i));
        auto idx = g.unflatten(i);
        if (idx[0] == 4 || idx[1] == 4) continue;  // Nyquist mirrors onto itself
        EXPECT_DOUBLE_EQ(a[0], -b[0]);
        EXPECT_DOUBLE_EQ(a[1], -b[1]);
        EXPECT_EQ(g.flatten(idx), i);
    }
}

TEST(Grid, RejectsBadShapes) {
    EXPECT_THROW(make_grid(4, 8, 1.0), ek::InvalidArgument);
    EXPECT_THROW(make_grid(1, 7, 1.0), ek::InvalidArgument);
    EXPECT_THROW(make_grid(1, 8, -1.0), ek::InvalidArgument);
}

TEST(Transform, RoundTripAndParseval) {
    for (int dim = 1; dim <= 3; ++dim) {
        auto g = make_grid(dim, dim == 3 ? 8 : 16, 5.0);
        std::mt19937_64 rng(dim);
        std::normal_distribution<double> N;
        Field f = Field::zeros(g, Space::physical);
        for (auto& v : f.values) v = {N(rng), N(rng)};
        Field fh = to_fourier(f);
        Field back = to_physical(fh);
        EXPECT_LT(max_diff(f, back), 1e-13);
        EXPECT_NEAR(norm(f, NormKind::lp(2)), norm(fh, NormKind::hs(0)), 1e-12 * norm(f, NormKind::lp(2)));
    }
}

TEST(Transform, SingleModeLandsOnItsIndex) {
    auto g = make_grid(1, 16, 2.0 * std::numbers::pi);
    Field f = physical(g, [](const Vec3& x) { return std::exp(cplx(0.0, 3.0 * x[0])); });
    Field fh = to_fourier(f);
    for (int i = 0; i < 16; ++i) EXPECT_NEAR(std::abs(fh.values[i]), i == 3 ? 4.0 : 0.0, 1e-13);
}

TEST(Derivative, ExactOnTrigonometricPolynomials) {
    const double L = 10.0, k = 2.0 * std::numbers::pi / L;
    auto g = make_grid(2, 32, L);
    Field f = physical(g, [&](const Vec3& x) { return std::sin(3 * k * x[0]) * std::cos(2 * k * x[1]); });
    Field dx = to_physical(derivative(to_fourier(f), 0));
    Field want = physical(g, [&](const Vec3& x) { return 3 * k * std::cos(3 * k * x[0]) * std::cos(2 * k * x[1]); });
    EXPECT_LT(max_diff(dx, want), 1e-12);
    Field lap = to_physical(laplacian(to_fourier(f)));
    Field want_lap = physical(g, [&](const Vec3& x) { return -13 * k * k * std::sin(3 * k * x[0]) * std::cos(2 * k * x[1]); });
    EXPECT_LT(max_diff(lap, want_lap), 1e-12);
}

TEST(Dyadic, PartitionOfUnity) {
    for (double r = 1.0; r < 5000.0; r *= 1.0137) {
        double s = 0.0;
        for (int j = 0; j < 16; ++j) s += dyadic_weight(r, j);
        EXPECT_NEAR(s, 1.0, 1e-14) << "r = " << r;
    }
    EXPECT_DOUBLE_EQ(dyadic_weight(0.0, 0), 1.0);
}

TEST(Dyadic, BlockCutoffSupport) {
    EXPECT_DOUBLE_EQ(block_cutoff(1.0, 1.0), 1.0);
    EXPECT_EQ(block_cutoff(0.5, 1.0), 0.0);
    EXPECT_EQ(block_cutoff(2.0, 1.0), 0.0);
    EXPECT_GT(block_cutoff(1.9, 1.0), 0.0);
}

TEST(Dyadic, ProjectionsSumToField) {
    auto g = make_grid(1, 64, 20.0);
    Field f = physical(g, [](const Vec3& x) { return std::exp(-(x[0] - 10) * (x[0] - 10)); });
    Field fh = to_fourier(f);
    Field sum = Field::zeros(g, Space::fourier);
    for (int j = 0; j <= dyadic_max(g); ++j) sum = add(sum, dyadic_project(fh, j));
    EXPECT_LT(max_diff(sum, fh), 1e-14);
}

TEST(Dealias, ProductOfLowModesIsExact) {
    const double L = 2.0 * std::numbers::pi;
    auto g = make_grid(1, 32, L);
    Field a = physical(g, [](const Vec3& x) { return std::cos(3 * x[0]); });
    Field b = physical(g, [](const Vec3& x) { return std::sin(4 * x[0]); });
    Field ab = to_physical(product(to_fourier(a), to_fourier(b)));
    Field want = physical(g, [](const Vec3& x) { return std::cos(3 * x[0]) * std::sin(4 * x[0]); });
    EXPECT_LT(max_diff(ab, want), 1e-14);
}

TEST(Dealias, RemovesTopThird) {
    auto g = make_grid(1, 30, 2.0 * std::numbers::pi);
    Field f = Field::zeros(g, Space::fourier);
    for (auto& v : f.values) v = 1.0;
    Field d = dealias(f);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double k = std::abs(g.wavenumber(static_cast<int>(i)));
        if (k > 10.0) {
            EXPECT_EQ(d.values[i], cplx(0.0)) << k;
        }
    }
    EXPECT_EQ(d.values[0], cplx(1.0));
}

TEST(Norms, ConstantField) {
    auto g = make_grid(2, 16, 3.0);
    Field one = physical(g, [](const Vec3&) { return 1.0; });
    EXPECT_NEAR(norm(one, NormKind::lp(2)), 3.0, 1e-13);
    EXPECT_NEAR(norm(one, NormKind::lp(4)), std::pow(9.0, 0.25), 1e-13);
    EXPECT_NEAR(norm(one, NormKind::lp(INFINITY)), 1.0, 1e-15);
    EXPECT_NEAR(norm(one, NormKind::hdot(1)), 0.0, 1e-15);
}

TEST(Norms, SobolevWeightOnSingleMode) {
    const double L = 2.0 * std::numbers::pi;
    auto g = make_grid(1, 32, L);
    Field f = physical(g, [](const Vec3& x) { return std::exp(cplx(0.0, 5.0 * x[0])); });
    const double l2 = std::sqrt(L);
    EXPECT_NEAR(norm(f, NormKind::hs(1)), std::sqrt(26.0) * l2, 1e-12);
    EXPECT_NEAR(norm(f, NormKind::hdot(1.5)), std::pow(5.0, 1.5) * l2, 1e-11);
    EXPECT_NEAR(norm(f, NormKind::wkp(1, INFINITY)), 1.0 + 5.0, 1e-12);
}

TEST(Norms, RejectsSubunitaryExponent) {
    auto g = make_grid(1, 8, 1.0);
    EXPECT_THROW(norm(Field::zeros(g, Space::physical), NormKind::lp(0.5)), ek::InvalidArgument);
}

TEST(RealImag, SplitRecoversParts) {
    auto g = make_grid(1, 32, 7.0);
    Field f = physical(g, [](const Vec3& x) { return cplx(std::cos(x[0]), std::exp(-x[0])); });
    Field re = to_physical(real_part_fourier(to_fourier(f)));
    Field im = to_physical(imag_part_fourier(to_fourier(f)));
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(re.values[i].real(), f.values[i].real(), 1e-14);
        EXPECT_NEAR(im.values[i].real(), f.values[i].imag(), 1e-14);
        EXPECT_NEAR(re.values[i].imag(), 0.0, 1e-14);
    }
}

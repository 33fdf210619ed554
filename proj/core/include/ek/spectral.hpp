#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace ek::spectral {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

enum class Space { physical, fourier };
enum class Direction { forward, inverse };

// Periodic torus [0,L)^dim with n points per axis. Axis index i carries the
// wavenumber (2π/L)·(i < n/2 ? i : i − n), so the band is {−n/2, …, n/2−1}.
struct Grid {
    int dim = 1;
    int n = 8;
    double L = 1.0;

    std::size_t size() const;
    double dx() const { return L / n; }
    double dk() const;
    double cell_volume() const;
    double volume() const;
    double k_max() const { return 0.5 * n * dk(); }

    int signed_index(int i) const { return i < n / 2 ? i : i - n; }
    double wavenumber(int i) const { return dk() * signed_index(i); }
    std::array<int, 3> unflatten(std::size_t flat) const;
    std::size_t flatten(const std::array<int, 3>& idx) const;
    Vec3 xi(std::size_t flat) const;
    Vec3 x(std::size_t flat) const;
    double xi_norm(std::size_t flat) const;
    // flat index of −ξ (mod n per axis)
    std::size_t mirror(std::size_t flat) const;

    bool operator==(const Grid& o) const { return dim == o.dim && n == o.n && L == o.L; }
};

Grid make_grid(int dim, int points_per_axis, double box_length);

// |ξ| at every lattice point, flat order.
std::vector<double> xi_norms(const Grid& g);

// Complex field, possibly vector-valued. Components are stored back to back.
struct Field {
    Grid grid;
    Space space = Space::physical;
    int components = 1;
    std::vector<cplx> values;

    static Field zeros(const Grid& g, Space s, int comps = 1);
    std::size_t points() const { return grid.size(); }
    cplx* component(int c) { return values.data() + c * points(); }
    const cplx* component(int c) const { return values.data() + c * points(); }
    Field extract(int c) const;
};

Field transform(const Field& f, Direction dir);
Field to_fourier(const Field& f);   // no-op when already in Fourier space
Field to_physical(const Field& f);  // no-op when already physical

using Symbol = std::function<cplx(const Vec3& xi)>;
using RadialSymbol = std::function<double(double r)>;

Field apply_multiplier(const Field& f, const Symbol& m);
Field apply_radial(const Field& f, const RadialSymbol& m);

// Fourier coefficients of Re v and Im v from those of v.
Field real_part_fourier(const Field& f);
Field imag_part_fourier(const Field& f);

Field derivative(const Field& f, int axis);
Field gradient(const Field& f);  // dim components, Fourier
Field laplacian(const Field& f);

// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
double smooth_step(double t);
// Dyadic partition function for block j, r measured in units of 2π/L.
// Support (2^{j−1}, 2^{j+1}); Σ_j = 1 for r ≥ 1; r = 0 belongs to block 0.
double dyadic_weight(double r_units, int j);
// Same profile for a continuous dyadic magnitude a: nonzero on (a/2, 2a), 1 at r = a.
double block_cutoff(double r, double a);
int dyadic_max(const Grid& g);
Field dyadic_project(const Field& f, int j);

Field dealias(const Field& f, double fraction = 2.0 / 3.0);
// Pseudospectral product of two Fourier fields with both inputs and output dealiased.
Field product(const Field& a, const Field& b, double fraction = 2.0 / 3.0);

struct NormKind {
    enum class Type { Lp, Hs, Wkp, Hdot } type = Type::Lp;
    double p = 2.0;
    double s = 0.0;
    int k = 0;
    static NormKind lp(double p) { return {Type::Lp, p, 0.0, 0}; }
    static NormKind hs(double s) { return {Type::Hs, 2.0, s, 0}; }
    static NormKind hdot(double s) { return {Type::Hdot, 2.0, s, 0}; }
    static NormKind wkp(int k, double p) { return {Type::Wkp, p, 0.0, k}; }
};

double norm(const Field& f, const NormKind& kind);

double max_abs(const Field& f);
Field add(const Field& a, const Field& b, double scale_b = 1.0);
void axpy(Field& y, cplx a, const Field& x);

}  // namespace ek::spectral

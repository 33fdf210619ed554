#include "ek/normalform.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ek/error.hpp"
#include "ek/propagator.hpp"
#include "ek/symbols.hpp"

namespace ek::normalform {

using spectral::Space;

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

void require_fourier(const Field& f, const char* op) {
    if (f.space != Space::fourier || f.components != 1)
        throw InvalidArgument(std::string(op) + ": scalar Fourier field expected");
}

double l2(const Field& f) {
    double s = 0.0;
    for (auto v : f.values) s += std::norm(v);
    return std::sqrt(s * f.grid.cell_volume());
}

Field times_i(Field f) {
    for (auto& v : f.values) v *= cplx(0.0, 1.0);
    return f;
}

}  // namespace

BilinearSymbol normal_form_symbol(double alpha) {
    BilinearSymbol s;
    s.symmetric = true;
    s.label = "normal_form";
    s.eval = [alpha](const Vec3& eta, const Vec3& zeta) {
        double q = 2.0 + dot(eta, eta) + dot(zeta, zeta);
        return cplx((alpha - 1.0) * dot(eta, zeta) / (2.0 * q), 0.0);
    };
    return s;
}

NormalFormParams make_params(double alpha) { return {alpha, normal_form_symbol(alpha)}; }

BilinearSymbol constant_symbol(cplx c) {
    BilinearSymbol s;
    s.symmetric = true;
    s.label = "constant";
    s.eval = [c](const Vec3&, const Vec3&) { return c; };
    return s;
}

double symbol_identity_residual(double alpha, const Vec3& eta, const Vec3& zeta) {
    double b = normal_form_symbol(alpha).eval(eta, zeta).real();
    return std::abs(2.0 * b * (2.0 + dot(eta, eta) + dot(zeta, zeta)) + (1.0 - alpha) * dot(eta, zeta));
}

Field bilinear_apply(const BilinearSymbol& B, const Field& f, const Field& g) {
    require_fourier(f, "bilinear_apply");
    require_fourier(g, "bilinear_apply");
    if (!(f.grid == g.grid)) throw InvalidArgument("bilinear_apply: grids differ");
    const auto& grid = f.grid;
    const std::size_t np = grid.size();
    if (np > kExactModeLimit) {
        std::ostringstream os;
        os << "bilinear_apply: " << np << " modes exceed the exact double-sum limit " << kExactModeLimit;
        throw GridTooLarge(os.str());
    }
    const int d = grid.dim, n = grid.n;
    std::vector<std::array<int, 3>> sidx(np);
    std::vector<Vec3> k(np);
    for (std::size_t i = 0; i < np; ++i) {
        auto idx = grid.unflatten(i);
        for (int a = 0; a < 3; ++a) sidx[i][a] = a < d ? grid.signed_index(idx[a]) : 0;
        k[i] = grid.xi(i);
    }
    Field out = Field::zeros(grid, Space::fourier);
    const double norm = 1.0 / std::sqrt(static_cast<double>(np));
    for (std::size_t xi = 0; xi < np; ++xi) {
        cplx acc(0.0, 0.0);
        for (std::size_t eta = 0; eta < np; ++eta) {
            const cplx fe = f.values[eta];
            if (fe == cplx(0.0, 0.0)) continue;
            std::array<int, 3> zi{0, 0, 0};
            bool inside = true;
            for (int a = 0; a < d; ++a) {
                int s = sidx[xi][a] - sidx[eta][a];
                if (s < -n / 2 || s > n / 2 - 1) {
                    inside = false;
                    break;
                }
                zi[a] = s < 0 ? s + n : s;
            }
            if (!inside) continue;
            std::size_t zeta = grid.flatten(zi);
            const cplx gz = g.values[zeta];
            if (gz == cplx(0.0, 0.0)) continue;
            acc += B.eval(k[eta], k[zeta]) * fe * gz;
        }
        out.values[xi] = norm * acc;
    }
    return out;
}

Field forward(const NormalFormParams& nf, const Field& phi, const Field& l) {
    Field out = l;
    spectral::axpy(out, -1.0, bilinear_apply(nf.B, phi, phi));
    spectral::axpy(out, 1.0, bilinear_apply(nf.B, l, l));
    return out;
}

InverseResult inverse(const NormalFormParams& nf, const Field& phi, const Field& l1, double tol, int max_iter) {
    const Field bpp = bilinear_apply(nf.B, phi, phi);
    InverseResult res;
    res.l = l1;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        Field next = l1;
        spectral::axpy(next, 1.0, bpp);
        spectral::axpy(next, -1.0, bilinear_apply(nf.B, res.l, res.l));
        double dist = l2(spectral::add(next, res.l, -1.0));
        res.l = std::move(next);
        res.iterations = it;
        res.last_step = dist;
        if (!std::isfinite(dist) || (it > 2 && dist > prev)) {
            std::ostringstream os;
            os << "normal form inverse: fixed-point iteration is not contracting (step " << it
               << ", increment " << dist << " > " << prev << ")";
            throw NormalFormDivergence(os.str());
        }
        if (dist <= tol) return res;
        prev = dist;
    }
    std::ostringstream os;
    os << "normal form inverse: no convergence after " << max_iter << " iterations (increment "
       << res.last_step << ")";
    throw NormalFormDivergence(os.str());
}

void split_state(const Field& psi, Field& phi, Field& l) {
    require_fourier(psi, "split_state");
    phi = propagator::apply_U_inv(spectral::real_part_fourier(psi)).field;
    l = spectral::imag_part_fourier(psi);
}

Field transform_state(const NormalFormParams& nf, const Field& psi) {
    Field phi, l;
    split_state(psi, phi, l);
    Field z = spectral::real_part_fourier(psi);
    spectral::axpy(z, cplx(0.0, 1.0), forward(nf, phi, l));
    return z;
}

Field quadratic_Q(const model::ModelParams& p, const NormalFormParams& nf, const Field& z, double fraction) {
    require_fourier(z, "quadratic_Q");
    Field phi, l1;
    split_state(z, phi, l1);
    const double alpha = nf.alpha;
    const int d = z.grid.dim;

    Field real_part = spectral::product(l1, spectral::laplacian(l1), fraction);
    for (auto& v : real_part.values) v *= alpha;
    Field gphi = spectral::gradient(phi), gl = spectral::gradient(l1);
    Field div = Field::zeros(z.grid, Space::fourier);
    for (int a = 0; a < d; ++a) {
        Field pa = gphi.extract(a), la = gl.extract(a);
        spectral::axpy(real_part, -0.5, spectral::product(pa, pa, fraction));
        spectral::axpy(real_part, 0.5, spectral::product(la, la, fraction));
        spectral::axpy(div, 1.0, spectral::derivative(spectral::product(l1, pa, fraction), a));
    }
    spectral::axpy(real_part, -0.5 * p.gtilde_second, spectral::product(l1, l1, fraction));

    Field b = bilinear_apply(nf.B, l1, l1);
    spectral::axpy(b, -1.0, bilinear_apply(nf.B, phi, phi));

    Field out = propagator::apply_U(real_part);
    spectral::axpy(out, 1.0, propagator::apply_H(b));
    spectral::axpy(out, cplx(0.0, -alpha), div);
    return out;
}

Field time_derivative_z(const model::ModelParams& p, const NormalFormParams& nf, const Field& psi, double fraction) {
    require_fourier(psi, "time_derivative_z");
    Field psit = times_i(propagator::apply_H(psi));
    spectral::axpy(psit, 1.0, propagator::nonlinearity(p, psi, fraction, 0.0));
    Field phi, l, phit, lt;
    split_state(psi, phi, l);
    split_state(psit, phit, lt);
    Field l1t = lt;
    spectral::axpy(l1t, -2.0, bilinear_apply(nf.B, phi, phit));
    spectral::axpy(l1t, 2.0, bilinear_apply(nf.B, l, lt));
    Field zt = spectral::real_part_fourier(psit);
    spectral::axpy(zt, cplx(0.0, 1.0), l1t);
    return zt;
}

Field remainder(const model::ModelParams& p, const NormalFormParams& nf, const Field& psi, double fraction) {
    Field z = transform_state(nf, psi);
    Field r = time_derivative_z(p, nf, psi, fraction);
    spectral::axpy(r, cplx(0.0, -1.0), propagator::apply_H(z));
    spectral::axpy(r, -1.0, quadratic_Q(p, nf, z, fraction));
    return r;
}

Field l_equation_quadratic(double alpha, const Field& phi, const Field& l, bool transformed, double fraction) {
    require_fourier(phi, "l_equation_quadratic");
    require_fourier(l, "l_equation_quadratic");
    const int d = phi.grid.dim;
    Field gphi = spectral::gradient(phi);
    Field out = Field::zeros(phi.grid, Space::fourier);
    if (transformed) {
        for (int a = 0; a < d; ++a)
            spectral::axpy(out, -alpha, spectral::derivative(spectral::product(l, gphi.extract(a), fraction), a));
        return out;
    }
    Field gl = spectral::gradient(l);
    for (int a = 0; a < d; ++a)
        spectral::axpy(out, -1.0, spectral::product(gphi.extract(a), gl.extract(a), fraction));
    spectral::axpy(out, -alpha, spectral::product(l, spectral::laplacian(phi), fraction));
    return out;
}

}  // namespace ek::normalform

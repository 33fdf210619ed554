#include "ek/diagnostics.hpp"

#include <cfloat>
#include <cmath>
#include <sstream>

#include "ek/error.hpp"
#include "ek/resonance.hpp"

namespace ek::diagnostics {

using spectral::cplx;
using spectral::Space;

namespace {

Field power_of_laplacian(const Field& fh, int m) {
    if (m == 0) return fh;
    return spectral::apply_radial(fh, [m](double r) { return std::pow(r * r, m); });
}

const propagator::Snapshot& find_snapshot(const propagator::Trajectory& traj, double t) {
    for (const auto& s : traj)
        if (std::abs(s.t - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
    std::ostringstream os;
    os << "no snapshot at t=" << t;
    throw InvalidArgument(os.str());
}

}  // namespace

EnergyReport modified_energy(const model::ModelParams& p, const model::StateBundle& b, int n, double t) {
    if (n < 0) throw InvalidArgument("modified_energy: n must be >= 0");
    const auto& grid = b.rho.grid;
    const double kmax = grid.k_max() * std::sqrt(static_cast<double>(grid.dim));
    if (std::pow(kmax, 2 * n) * DBL_EPSILON > 1e-4) {
        std::ostringstream os;
        os << "modified_energy: resolution guard, |xi|_max^(2n) * eps = " << std::pow(kmax, 2 * n) * DBL_EPSILON
           << " for n=" << n;
        throw InvalidArgument(os.str());
    }
    const std::size_t np = grid.size();
    const double dV = grid.cell_volume();
    std::vector<double> a(np), sq(np);
    for (std::size_t i = 0; i < np; ++i) {
        const double rho = b.rho.values[i].real();
        a[i] = model::sound_coefficient_a(p, rho);
        sq[i] = std::sqrt(rho);
    }
    const Field phih = spectral::to_fourier(b.phi), lh = spectral::to_fourier(b.l);
    const Field gphi = spectral::gradient(phih), gl = spectral::gradient(lh);

    EnergyReport rep;
    rep.t = t;
    for (int m = 0; m <= n; ++m) {
        EnergyLevel lev;
        lev.m = m;
        Field dz_re = spectral::to_physical(power_of_laplacian(gphi, m));
        Field dz_im = spectral::to_physical(power_of_laplacian(gl, m));
        Field dl = spectral::to_physical(power_of_laplacian(lh, m));
        double gz = 0.0, dn = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double w = std::pow(a[i], m) * sq[i];
            const double w2 = w * w;
            double z2 = 0.0;
            for (int c = 0; c < grid.dim; ++c)
                z2 += std::norm(dz_re.component(c)[i].real() + cplx(0.0, 1.0) * dz_im.component(c)[i].real());
            gz += w2 * z2;
            dn += 2.0 * w2 / a[i] * std::norm(dl.values[i].real());
        }
        lev.gradient_term = gz * dV;
        lev.density_term = dn * dV;
        rep.total += lev.gradient_term + lev.density_term;
        rep.levels.push_back(lev);
    }
    return rep;
}

double x_norm_exponent(int dim, double eps) {
    const double inv = 0.5 - 1.0 / dim - eps;
    if (!(inv > 0.0)) {
        std::ostringstream os;
        os << "x_norm: 1/p = 1/2 - 1/d - eps = " << inv << " is not positive for d=" << dim << "; set p explicitly";
        throw InvalidArgument(os.str());
    }
    return 1.0 / inv;
}

NormSnapshot x_norm_snapshot(const Field& psi, double t, const XNormConfig& cfg) {
    NormSnapshot s;
    s.t = t;
    s.N = cfg.N;
    s.k = cfg.k;
    s.eps = cfg.eps;
    s.p = cfg.p > 0.0 ? cfg.p : x_norm_exponent(psi.grid.dim, cfg.eps);
    Field ph = spectral::to_fourier(psi);
    s.hN = spectral::norm(ph, spectral::NormKind::hs(cfg.N));
    s.weighted = weighted_profile_norm(ph, t);
    const double bracket = std::sqrt(1.0 + t * t);
    s.wkp_scaled = std::pow(bracket, 1.0 + 3.0 * cfg.eps) * spectral::norm(ph, spectral::NormKind::wkp(cfg.k, s.p));
    for (double v : {s.hN, s.weighted, s.wkp_scaled})
        if (!std::isfinite(v)) throw NonFinite("x_norm_snapshot: non-finite component");
    return s;
}

double weighted_profile_norm(const Field& psi, double t) {
    if (psi.space != Space::fourier) throw InvalidArgument("weighted_profile_norm: Fourier field expected");
    const Field f = propagator::linear_propagate(psi, -t);
    const auto& g = f.grid;
    const std::size_t np = g.size();
    const double inv2dk = 1.0 / (2.0 * g.dk());
    double acc = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        auto idx = g.unflatten(i);
        for (int ax = 0; ax < g.dim; ++ax) {
            auto up = idx, dn = idx;
            up[ax] = (idx[ax] + 1) % g.n;
            dn[ax] = (idx[ax] + g.n - 1) % g.n;
            for (int c = 0; c < f.components; ++c) {
                cplx d = (f.component(c)[g.flatten(up)] - f.component(c)[g.flatten(dn)]) * inv2dk;
                acc += std::norm(d);
            }
        }
    }
    return std::sqrt(acc * g.cell_volume());
}

double wrap_around_limit(const Field& psi, double velocity_threshold) {
    Field ph = spectral::to_fourier(psi);
    return ph.grid.L / (2.0 * propagator::group_velocity_bound(ph, velocity_threshold));
}

DecayFit decay_fit(const propagator::Trajectory& traj, const spectral::NormKind& kind, const DecayWindow& w) {
    if (traj.empty()) throw InvalidArgument("decay_fit: empty trajectory");
    if (w.t_min < 5.0) throw InvalidArgument("decay_fit: window must start at t >= 5");
    DecayFit fit;
    fit.wrap_limit = wrap_around_limit(traj.front().psi, w.velocity_threshold);
    const double t_max = w.t_max > 0.0 ? w.t_max : fit.wrap_limit;
    if (t_max > fit.wrap_limit * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "decay_fit: window end " << t_max << " exceeds the wrap-around limit " << fit.wrap_limit;
        throw InvalidArgument(os.str());
    }
    if (t_max < std::sqrt(10.0) * w.t_min) {
        std::ostringstream os;
        os << "decay_fit: window [" << w.t_min << ", " << t_max << "] spans less than half a decade";
        throw InvalidArgument(os.str());
    }
    std::vector<double> ts, vs;
    for (const auto& s : traj) {
        if (s.t < w.t_min - 1e-12 || s.t > t_max + 1e-12) continue;
        ts.push_back(s.t);
        vs.push_back(spectral::norm(s.psi, kind));
    }
    if (ts.size() < 8) {
        std::ostringstream os;
        os << "decay_fit: " << ts.size() << " snapshots in the window, at least 8 required";
        throw InvalidArgument(os.str());
    }
    auto f = resonance::loglog_fit(ts, vs);
    fit.slope = f.slope;
    fit.stderr_slope = f.stderr_slope;
    fit.t_min = ts.front();
    fit.t_max = ts.back();
    fit.points = ts.size();
    return fit;
}

Field scattering_profile(const Field& psi, double t) {
    return propagator::linear_propagate(spectral::to_fourier(psi), -t);
}

double cauchy_variation(const propagator::Trajectory& traj, double t1, double t2, double s) {
    if (!(t2 > t1 && t1 >= 1.0)) throw InvalidArgument("cauchy_variation: need t2 > t1 >= 1");
    const auto& a = find_snapshot(traj, t1);
    const auto& b = find_snapshot(traj, t2);
    Field d = spectral::add(scattering_profile(b.psi, b.t), scattering_profile(a.psi, a.t), -1.0);
    return spectral::norm(d, spectral::NormKind::hs(s));
}

double mass(const model::ModelParams& p, const Field& psi) {
    auto b = model::from_analytic(p, psi);
    double acc = 0.0;
    for (auto v : b.rho.values) acc += v.real() - p.rho_c;
    return acc * b.rho.grid.cell_volume();
}

}  // namespace ek::diagnostics

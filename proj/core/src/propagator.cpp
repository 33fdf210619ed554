#include "ek/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <tuple>

#include "ek/error.hpp"

namespace ek::propagator {

using spectral::cplx;
using spectral::Space;

namespace {

struct Tables {
    std::vector<double> r, H, U, Uinv;
    std::vector<std::size_t> mirror;
    std::vector<spectral::Vec3> k;
};

std::shared_ptr<const Tables> tables_for(const Grid& g) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, double>, std::shared_ptr<const Tables>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(g.dim, g.n, g.L);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto t = std::make_shared<Tables>();
    const std::size_t np = g.size();
    t->r.resize(np);
    t->H.resize(np);
    t->U.resize(np);
    t->Uinv.resize(np);
    t->mirror.resize(np);
    t->k.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
        t->k[i] = g.xi(i);
        t->r[i] = g.xi_norm(i);
        t->H[i] = symbol_H(t->r[i]);
        t->U[i] = symbol_U(t->r[i]);
        t->Uinv[i] = symbol_U_inv(t->r[i]);
        t->mirror[i] = g.mirror(i);
    }
    cache.emplace(key, t);
    return t;
}

void require_fourier(const Field& f, const char* op) {
    if (f.space != Space::fourier || f.components != 1)
        throw InvalidArgument(std::string(op) + ": scalar Fourier field expected");
}

// Fourier coefficients of Re v and Im v
void split(const Tables& t, const Field& v, Field& re, Field& im) {
    re = v;
    im = v;
    const std::size_t np = v.points();
    for (std::size_t i = 0; i < np; ++i) {
        cplx a = v.values[i], b = std::conj(v.values[t.mirror[i]]);
        re.values[i] = 0.5 * (a + b);
        im.values[i] = cplx(0.0, -0.5) * (a - b);
    }
}

// a + i b in Fourier space for real-field coefficient arrays a, b
Field pack(const Field& a, const Field& b) {
    Field out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += cplx(0.0, 1.0) * b.values[i];
    return out;
}

void check_finite(const Field& f, const char* what) {
    for (auto v : f.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NonFinite(std::string(what) + ": non-finite value detected");
}

using LinearOp = std::function<Field(const Field&, double)>;
using NonlinearOp = std::function<Field(const Field&)>;

Field generic_step(Scheme scheme, const LinearOp& E, const NonlinearOp& N, const Field& psi, double h) {
    if (scheme == Scheme::strang_splitting) {
        Field y = E(psi, 0.5 * h);
        Field k1 = N(y);
        Field mid = y;
        spectral::axpy(mid, 0.5 * h, k1);
        Field k2 = N(mid);
        spectral::axpy(y, h, k2);
        return E(y, 0.5 * h);
    }
    // Lawson (integrating-factor) RK4
    Field k1 = N(psi);
    Field half = E(psi, 0.5 * h);
    Field a = half;
    spectral::axpy(a, 0.5 * h, E(k1, 0.5 * h));
    Field k2 = N(a);
    Field b = half;
    spectral::axpy(b, 0.5 * h, k2);
    Field k3 = N(b);
    Field c = E(psi, h);
    spectral::axpy(c, h, E(k3, 0.5 * h));
    Field k4 = N(c);
    Field out = E(psi, h);
    spectral::axpy(out, h / 6.0, E(k1, h));
    Field k23 = k2;
    spectral::axpy(k23, 1.0, k3);
    spectral::axpy(out, h / 3.0, E(k23, 0.5 * h));
    spectral::axpy(out, h / 6.0, k4);
    return out;
}

std::string at_time(const Error& e, double t) {
    std::ostringstream os;
    os << e.what() << " (at t = " << t << ")";
    return os.str();
}

// keeps the concrete error type so callers can still catch it
template <class E>
[[noreturn]] void rethrow_at(const E& e, double t) {
    throw E(at_time(e, t));
}

Trajectory generic_evolve(const IntegratorConfig& cfg, const Field& psi0,
                          const std::function<Field(const Field&, double)>& stepper) {
    if (!(cfg.dt > 0.0)) throw InvalidArgument("evolve: dt must be positive");
    if (!std::is_sorted(cfg.snapshot_times.begin(), cfg.snapshot_times.end()))
        throw InvalidArgument("evolve: snapshot_times must be sorted");
    if (!cfg.snapshot_times.empty() && cfg.snapshot_times.front() < 0.0)
        throw InvalidArgument("evolve: snapshot_times must be non-negative");
    Trajectory traj;
    Field psi = psi0;
    double t = 0.0;
    for (double target : cfg.snapshot_times) {
        while (t < target) {
            double h = std::min(cfg.dt, target - t);
            bool last = target - t - h <= 1e-12 * cfg.dt;
            if (last) h = target - t;
            try {
                psi = stepper(psi, h);
            } catch (const AmplitudeGuard& e) {
                rethrow_at(e, t);
            } catch (const VacuumProximity& e) {
                rethrow_at(e, t);
            } catch (const NonFinite& e) {
                rethrow_at(e, t);
            } catch (const Error& e) {
                throw Error(e.kind(), at_time(e, t));
            }
            t = last ? target : t + h;
        }
        traj.push_back({t, psi});
    }
    return traj;
}

}  // namespace

Field apply_U(const Field& f) { return spectral::apply_radial(f, symbol_U); }

FlaggedField apply_U_inv(const Field& f) {
    if (f.space != Space::fourier) throw InvalidArgument("apply_U_inv: Fourier field expected");
    FlaggedField out;
    bool flag = false;
    for (int c = 0; c < f.components; ++c) flag = flag || std::abs(f.component(c)[0]) > 1e-12;
    out.field = spectral::apply_radial(f, symbol_U_inv);
    out.zero_mode_flag = flag;
    return out;
}

Field apply_H(const Field& f) { return spectral::apply_radial(f, symbol_H); }

Field linear_propagate(const Field& psi, double t) {
    if (!std::isfinite(t)) throw NonFinite("linear_propagate: non-finite time");
    if (psi.space != Space::fourier) throw InvalidArgument("linear_propagate: Fourier field expected");
    auto tab = tables_for(psi.grid);
    Field out = psi;
    const std::size_t np = psi.points();
    for (int c = 0; c < psi.components; ++c) {
        cplx* v = out.component(c);
        for (std::size_t i = 0; i < np; ++i) v[i] *= std::polar(1.0, t * tab->H[i]);
    }
    return out;
}

double group_velocity_bound(const Grid& g) {
    auto tab = tables_for(g);
    double m = 0.0;
    for (double r : tab->r) m = std::max(m, symbol_H_prime(r));
    return m;
}

double group_velocity_bound(const Field& psi, double threshold) {
    require_fourier(psi, "group_velocity_bound");
    auto tab = tables_for(psi.grid);
    double peak = spectral::max_abs(psi);
    double m = symbol_H_prime(0.0);
    for (std::size_t i = 0; i < psi.points(); ++i)
        if (std::abs(psi.values[i]) > threshold * peak) m = std::max(m, symbol_H_prime(tab->r[i]));
    return m;
}

double linear_energy(const Field& psi) {
    require_fourier(psi, "linear_energy");
    auto tab = tables_for(psi.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < psi.points(); ++i)
        s += (2.0 + tab->r[i] * tab->r[i]) * std::norm(psi.values[i]);
    return s * psi.grid.cell_volume();
}

NonlinearTerms nonlinear_terms(const model::ModelParams& p, const Field& psi, double fraction,
                               double amplitude_guard) {
    require_fourier(psi, "nonlinearity");
    const Grid& g = psi.grid;
    auto tab = tables_for(g);
    const std::size_t np = psi.points();
    const int d = g.dim;

    Field phi1, lhat;
    split(*tab, psi, phi1, lhat);
    Field phihat = phi1;
    for (std::size_t i = 0; i < np; ++i) phihat.values[i] *= tab->Uinv[i];
    phihat = spectral::dealias(phihat, fraction);
    lhat = spectral::dealias(lhat, fraction);

    std::vector<double> grad_dot(np, 0.0), grad_phi2(np, 0.0), grad_l2(np, 0.0);
    for (int a = 0; a < d; ++a) {
        Field c = phihat;
        for (std::size_t i = 0; i < np; ++i)
            c.values[i] = cplx(0.0, tab->k[i][a]) * phihat.values[i] +
                          cplx(0.0, 1.0) * cplx(0.0, tab->k[i][a]) * lhat.values[i];
        Field phys = spectral::to_physical(c);
        for (std::size_t i = 0; i < np; ++i) {
            double dphi = phys.values[i].real(), dl = phys.values[i].imag();
            grad_dot[i] += dphi * dl;
            grad_phi2[i] += dphi * dphi;
            grad_l2[i] += dl * dl;
        }
    }
    Field lap = phihat;
    for (std::size_t i = 0; i < np; ++i) {
        double r2 = tab->r[i] * tab->r[i];
        lap.values[i] = -r2 * phihat.values[i] + cplx(0.0, -r2) * lhat.values[i];
    }
    Field lap_phys = spectral::to_physical(lap);
    Field l_phys = spectral::to_physical(lhat);

    double lmax = 0.0;
    for (auto v : l_phys.values) lmax = std::max(lmax, std::abs(v.real()));
    if (amplitude_guard > 0.0 && lmax > amplitude_guard) {
        std::ostringstream os;
        os << "amplitude guard: ||l||_inf = " << lmax << " exceeds " << amplitude_guard;
        throw AmplitudeGuard(os.str());
    }
    auto [lo, hi] = model::ell_range(p);
    if (!(1.0 - lmax > lo && 1.0 + lmax < hi))
        throw VacuumProximity("nonlinearity: l leaves the image of the admissible density interval");

    NonlinearTerms out{Field::zeros(g, Space::physical), Field::zeros(g, Space::physical)};
    for (std::size_t i = 0; i < np; ++i) {
        double l = l_phys.values[i].real();
        double rho = model::rho_of_ell_unchecked(p, 1.0 + l);
        double a = std::sqrt(rho * p.K(rho));
        double gt = p.g(rho);
        double lap_phi = lap_phys.values[i].real(), lap_l = lap_phys.values[i].imag();
        double n1 = (a - 1.0) * lap_l - 0.5 * (grad_phi2[i] - grad_l2[i]) + (2.0 * l - gt);
        double n2 = -grad_dot[i] + (1.0 - a) * lap_phi;
        out.N1.values[i] = n1;
        out.N2.values[i] = n2;
    }
    return out;
}

Field nonlinearity(const model::ModelParams& p, const Field& psi, double fraction, double amplitude_guard) {
    NonlinearTerms nt = nonlinear_terms(p, psi, fraction, amplitude_guard);
    auto tab = tables_for(psi.grid);
    Field packed = nt.N1;
    for (std::size_t i = 0; i < packed.values.size(); ++i)
        packed.values[i] = cplx(nt.N1.values[i].real(), nt.N2.values[i].real());
    Field hat = spectral::to_fourier(packed);
    Field n1, n2;
    split(*tab, hat, n1, n2);
    Field out = n1;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = tab->U[i] * n1.values[i] + cplx(0.0, 1.0) * n2.values[i];
    return spectral::dealias(out, fraction);
}

Field step(const model::ModelParams& p, const IntegratorConfig& cfg, const Field& psi, double dt) {
    require_fourier(psi, "step");
    if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
    if (!cfg.nonlinear) return linear_propagate(psi, dt);
    auto E = [](const Field& v, double t) { return linear_propagate(v, t); };
    auto N = [&](const Field& v) { return nonlinearity(p, v, cfg.dealias_fraction, cfg.amplitude_guard); };
    Field out = generic_step(cfg.scheme, E, N, psi, dt);
    check_finite(out, "step");
    return out;
}

Trajectory evolve(const model::ModelParams& p, const IntegratorConfig& cfg, const Field& psi0) {
    require_fourier(psi0, "evolve");
    return generic_evolve(cfg, psi0, [&](const Field& v, double h) { return step(p, cfg, v, h); });
}

Field gp_linear_propagate(const Field& u, double t) {
    require_fourier(u, "gp_linear_propagate");
    auto tab = tables_for(u.grid);
    Field A, B;
    split(*tab, u, A, B);
    const cplx A0 = A.values[0], B0 = B.values[0];
    Field w = A;
    for (std::size_t i = 0; i < w.values.size(); ++i)
        w.values[i] = (tab->U[i] * B.values[i] + cplx(0.0, 1.0) * A.values[i]) * std::polar(1.0, t * tab->H[i]);
    Field wr, wi;
    split(*tab, w, wr, wi);
    for (std::size_t i = 0; i < wr.values.size(); ++i) wr.values[i] *= tab->Uinv[i];
    wi.values[0] = A0;
    wr.values[0] = B0 - 2.0 * t * A0;
    return pack(wi, wr);
}

Field gp_nonlinearity(const Field& u, double fraction) {
    require_fourier(u, "gp_nonlinearity");
    Field phys = spectral::to_physical(spectral::dealias(u, fraction));
    for (auto& v : phys.values) {
        double m2 = std::norm(v);
        v = cplx(0.0, -1.0) * (v * v + 2.0 * m2 + m2 * v);
    }
    return spectral::dealias(spectral::to_fourier(phys), fraction);
}

Field gp_reference_step(const IntegratorConfig& cfg, const Field& u, double dt) {
    require_fourier(u, "gp_reference_step");
    if (!(dt > 0.0)) throw InvalidArgument("gp_reference_step: dt must be positive");
    auto E = [](const Field& v, double t) { return gp_linear_propagate(v, t); };
    if (!cfg.nonlinear) return E(u, dt);
    auto N = [&](const Field& v) { return gp_nonlinearity(v, cfg.dealias_fraction); };
    Field out = generic_step(cfg.scheme, E, N, u, dt);
    check_finite(out, "gp_reference_step");
    return out;
}

Trajectory gp_evolve(const IntegratorConfig& cfg, const Field& u0) {
    require_fourier(u0, "gp_evolve");
    return generic_evolve(cfg, u0, [&](const Field& v, double h) { return gp_reference_step(cfg, v, h); });
}

}  // namespace ek::propagator

#include "ek/resonance.hpp"

#include <algorithm>
#include <random>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/sobol.hpp>

#include "ek/error.hpp"
#include "ek/symbols.hpp"

namespace ek::resonance {

using propagator::symbol_H;
using propagator::symbol_H_prime;
using propagator::symbol_U;
using spectral::smooth_step;

namespace {

constexpr double kPi = 3.14159265358979323846;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double nrm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
Vec3 unit(const Vec3& a) {
    double n = nrm(a);
    return n > 0.0 ? scale(a, 1.0 / n) : Vec3{0.0, 0.0, 0.0};
}
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// H(u) + H(v) − H(u − v) rationalized so no two large terms of opposite sign meet.
// With p = |u|, q = |v|, d = u·v the numerator (H(u) + H(v))² − H(u − v)² is
//   4(d + pq) + 2pq(√((2+p²)(2+q²)) − 2) − 2p²q² + 4d(p² + q²) − 4d².
double tri(const Vec3& u, const Vec3& v) {
    const double p2 = dot(u, u), q2 = dot(v, v), d = dot(u, v);
    const Vec3 w = sub(u, v);
    const double hu = symbol_H(std::sqrt(p2)), hv = symbol_H(std::sqrt(q2)), hw = symbol_H(nrm(w));
    const double den = hu + hv + hw;
    if (den == 0.0) return 0.0;
    const double pq = std::sqrt(p2 * q2);
    const Vec3 c = cross(u, v);
    const double d_plus_pq = d >= 0.0 ? d + pq : dot(c, c) / (pq - d);
    const double ab = (2.0 + p2) * (2.0 + q2);
    const double root_minus_2 = (2.0 * p2 + 2.0 * q2 + p2 * q2) / (std::sqrt(ab) + 2.0);
    const double num = 4.0 * d_plus_pq + 2.0 * pq * root_minus_2 - 2.0 * p2 * q2 + 4.0 * d * (p2 + q2) - 4.0 * d * d;
    return num / den;
}

class Sobol {
public:
    Sobol(int dims, std::uint64_t skip) : gen_(static_cast<unsigned>(dims)), dims_(dims) {
        gen_.seed(skip + 1);  // the first point of the sequence is the corner 0
    }
    std::vector<double> next() {
        std::vector<double> u(dims_);
        for (auto& v : u) {
            double x = std::ldexp(static_cast<double>(gen_()) + 0.5, -64);
            v = std::clamp(x, 1e-12, 1.0 - 1e-12);
        }
        return u;
    }

private:
    boost::random::sobol gen_;
    int dims_;
};

// unit vector in ℝ^d from d−1 uniforms (d = 1 uses one uniform for the sign)
Vec3 direction(int d, const double* u) {
    if (d == 1) return {u[0] < 0.5 ? -1.0 : 1.0, 0.0, 0.0};
    if (d == 2) {
        double t = 2.0 * kPi * u[0];
        return {std::cos(t), std::sin(t), 0.0};
    }
    double z = 2.0 * u[0] - 1.0, t = 2.0 * kPi * u[1];
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {z, s * std::cos(t), s * std::sin(t)};
}
int dir_dims(int d) { return d == 1 ? 1 : d - 1; }

double S_much(double x) { return x > 0.0 ? smooth_step(std::log2(x) - 2.0) : 0.0; }
double S_little(double x) { return x > 0.0 ? S_much(1.0 / x) : 1.0; }
double S_comparable(double x) {
    if (x <= 0.0) return 0.0;
    double t = std::log2(x);
    return smooth_step(t + 2.0) * smooth_step(2.0 - t);
}

}  // namespace

std::string PhaseSpec::label() const { return std::string(s1 > 0 ? "+" : "-") + (s2 > 0 ? "+" : "-"); }

PhaseSpec parse_phase(const std::string& label) {
    if (label.size() != 2) throw InvalidArgument("phase label must be one of ++, +-, -+, --: '" + label + "'");
    auto sign = [&](char c) {
        if (c == '+') return 1;
        if (c == '-') return -1;
        throw InvalidArgument("phase label must be one of ++, +-, -+, --: '" + label + "'");
    };
    return {sign(label[0]), sign(label[1])};
}

double phase(const PhaseSpec& spec, const Vec3& xi, const Vec3& eta) {
    const Vec3 zeta = sub(xi, eta);
    const double x2 = dot(xi, xi), e2 = dot(eta, eta), z2 = dot(zeta, zeta);
    if (spec.s1 > 0 && spec.s2 > 0) {
        return symbol_H(std::sqrt(x2)) + symbol_H(std::sqrt(e2)) + symbol_H(std::sqrt(z2));
    }
    if (spec.s1 < 0 && spec.s2 > 0) return tri(xi, zeta);    // H(ξ) + H(ζ) − H(η), η = ξ − ζ
    if (spec.s1 > 0 && spec.s2 < 0) return tri(xi, eta);     // H(ξ) + H(η) − H(ζ)
    return -tri(eta, {-zeta[0], -zeta[1], -zeta[2]});       // ξ = η − (−ζ)
}

Vec3 grad_eta(const PhaseSpec& spec, const Vec3& xi, const Vec3& eta) {
    const Vec3 zeta = sub(xi, eta);
    const Vec3 ue = unit(eta), uz = unit(zeta);
    const double pe = symbol_H_prime(nrm(eta)), pz = symbol_H_prime(nrm(zeta));
    Vec3 g{};
    for (int i = 0; i < 3; ++i) g[i] = spec.s1 * pe * ue[i] - spec.s2 * pz * uz[i];
    return g;
}

// ---------------------------------------------------------------- scans

namespace {

struct ScanGeometry {
    ScanMode mode;
    int d;
    double r, R, eta_min;

    // map free coordinates (ξ,η ∈ ℝ^d) onto the constraint set
    void project(Vec3& xi, Vec3& eta) const {
        if (mode == ScanMode::sphere) {
            double s = nrm(xi) + nrm(eta);
            if (s == 0.0) {
                xi = {r, 0.0, 0.0};
                return;
            }
            xi = scale(xi, r / s);
            eta = scale(eta, r / s);
            return;
        }
        double n = nrm(xi);
        xi = n > 0.0 ? scale(xi, r / n) : Vec3{r, 0.0, 0.0};
        double ne = nrm(eta);
        if (ne > R) eta = scale(eta, R / ne);
        if (eta_min > 0.0 && ne < eta_min) eta = ne > 0.0 ? scale(eta, eta_min / ne) : Vec3{-eta_min, 0.0, 0.0};
    }
};

struct Objective {
    PhaseSpec spec;
    int which;  // 0 |Ω|, 1 |∇Ω|, 2 max
    double operator()(const Vec3& xi, const Vec3& eta) const {
        double p = std::abs(phase(spec, xi, eta));
        double g = nrm(grad_eta(spec, xi, eta));
        return which == 0 ? p : which == 1 ? g : std::max(p, g);
    }
};

ScanPoint polish_point(const Objective& f, const ScanGeometry& geo, ScanPoint p, std::uint64_t seed) {
    const int d = geo.d;
    const bool move_xi = geo.mode == ScanMode::sphere;  // in slice mode ξ is fixed by symmetry
    double step = 0.05 * std::max(geo.r, 1e-300);
    const double stop = 1e-9 * geo.r;
    // coordinate moves stall on the ridges of |·|-type objectives; random directions get past them
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    auto try_move = [&](const Vec3& dxi, const Vec3& deta) {
        ScanPoint q = p;
        for (int i = 0; i < d; ++i) q.xi[i] += step * dxi[i], q.eta[i] += step * deta[i];
        geo.project(q.xi, q.eta);
        q.value = f(q.xi, q.eta);
        if (q.value < p.value) {
            p = q;
            return true;
        }
        return false;
    };
    for (int it = 0; it < 20000 && step > stop; ++it) {
        bool improved = false;
        for (int c = 0; c < 2 * d && !improved; ++c) {
            if (c < d && !move_xi) continue;
            for (int sgn = -1; sgn <= 1 && !improved; sgn += 2) {
                Vec3 dxi{}, deta{};
                (c < d ? dxi[c] : deta[c - d]) = sgn;
                improved = try_move(dxi, deta);
            }
        }
        for (int k = 0; k < 8 * d && !improved; ++k) {
            Vec3 dxi{}, deta{};
            double n2 = 0.0;
            for (int i = 0; i < d; ++i) {
                if (move_xi) dxi[i] = gauss(rng);
                deta[i] = gauss(rng);
                n2 += dxi[i] * dxi[i] + deta[i] * deta[i];
            }
            const double inv = 1.0 / std::sqrt(n2);
            for (int i = 0; i < d; ++i) dxi[i] *= inv, deta[i] *= inv;
            improved = try_move(dxi, deta);
        }
        if (!improved) step *= 0.5;
    }
    return p;
}

}  // namespace

ScanReport resonant_scan(const PhaseSpec& spec, double radius, const ScanConfig& cfg) {
    if (!(radius > 0.0)) throw InvalidArgument("resonant_scan: radius must be positive");
    if (cfg.samples < 1000) throw InvalidArgument("resonant_scan: at least 1000 samples required");
    if (cfg.dim < 1 || cfg.dim > 3) throw InvalidArgument("resonant_scan: dim must be 1, 2 or 3");
    const int d = cfg.dim;
    ScanGeometry geo{cfg.mode, d, radius, cfg.ball_radius, cfg.eta_min};
    if (cfg.mode == ScanMode::slice && cfg.eta_min >= cfg.ball_radius)
        throw InvalidArgument("resonant_scan: eta_min must be below ball_radius");

    // Three strata: the whole set, and small neighbourhoods of η = 0 and ξ − η = 0
    // where the cone points of H make the phase non-smooth.
    const int dd = dir_dims(d);
    Sobol qrng(2 + 2 * dd + 1, cfg.seed);
    std::vector<ScanPoint> pts;
    pts.reserve(cfg.samples);
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        auto u = qrng.next();
        const int stratum = static_cast<int>(k % 4 == 3 ? 2 : k % 4 == 2 ? 1 : 0);
        Vec3 xi{}, eta{};
        Vec3 dxi = direction(d, &u[1]), deta = direction(d, &u[1 + dd]);
        double t = u[0], rr = u[1 + 2 * dd];
        if (cfg.mode == ScanMode::sphere) {
            xi = scale(dxi, radius * (stratum == 0 ? t : 1.0));
            if (stratum == 0) eta = scale(deta, radius * (1.0 - t));
            else if (stratum == 1) eta = scale(deta, radius * 0.5 * t);
            else eta = spectral::Vec3{xi[0] + 0.5 * radius * t * deta[0], xi[1] + 0.5 * radius * t * deta[1],
                                      xi[2] + 0.5 * radius * t * deta[2]};
        } else {
            xi = {radius, 0.0, 0.0};
            double lo = cfg.eta_min, hi = cfg.ball_radius;
            double rad = stratum == 0 ? std::pow(lo * lo * lo + (hi * hi * hi - lo * lo * lo) * rr, 1.0 / 3.0)
                                      : 2.0 * radius * rr;
            eta = scale(deta, rad);
            if (stratum == 2) eta = {xi[0] + eta[0], xi[1] + eta[1], xi[2] + eta[2]};
        }
        geo.project(xi, eta);
        pts.push_back({0.0, xi, eta});
    }

    ScanReport rep;
    rep.radius = radius;
    ScanPoint* slots[3] = {&rep.min_phase, &rep.min_gradient, &rep.min_joint};
    for (int which = 0; which < 3; ++which) {
        Objective f{spec, which};
        for (auto& p : pts) p.value = f(p.xi, p.eta);
        std::size_t keep = std::min(cfg.polish, pts.size());
        std::partial_sort(pts.begin(), pts.begin() + keep, pts.end(),
                          [](const ScanPoint& a, const ScanPoint& b) { return a.value < b.value; });
        ScanPoint best = pts.front();
        for (std::size_t i = 0; i < keep; ++i) {
            ScanPoint q = polish_point(f, geo, pts[i], cfg.seed * 1000003u + 31u * which + i);
            if (q.value < best.value) best = q;
        }
        *slots[which] = best;
    }
    // a minimizer of one objective is often a better start for another
    for (int which = 0; which < 3; ++which) {
        Objective f{spec, which};
        for (int other = 0; other < 3; ++other) {
            if (other == which) continue;
            ScanPoint start = *slots[other];
            start.value = f(start.xi, start.eta);
            ScanPoint q = polish_point(f, geo, start, cfg.seed * 1000003u + 7u * which + other + 101u);
            if (q.value < slots[which]->value) *slots[which] = q;
        }
    }
    return rep;
}

ScalingFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_fit: need matching series of length >= 2");
    const std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("loglog_fit: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += lx[i], my += ly[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) sxx += (lx[i] - mx) * (lx[i] - mx), sxy += (lx[i] - mx) * (ly[i] - my);
    if (sxx == 0.0) throw InvalidArgument("loglog_fit: abscissae are all equal");
    ScalingFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = ly[i] - f.intercept - f.slope * lx[i];
            sse += e * e;
        }
        f.stderr_slope = std::sqrt(sse / (n - 2) / sxx);
    }
    return f;
}

double product_bound_constant(int dim, std::size_t samples, double r_lo, double r_hi, std::uint64_t seed) {
    if (!(r_lo > 0.0) || !(r_hi >= r_lo)) throw InvalidArgument("product_bound_constant: need 0 < r_lo <= r_hi");
    const int dd = dir_dims(dim);
    Sobol qrng(2 + 2 * dd, seed);
    const PhaseSpec pp{1, 1};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples; ++k) {
        auto u = qrng.next();
        double r = r_lo * std::pow(r_hi / r_lo, u[0]);
        Vec3 xi = scale(direction(dim, &u[2]), r * u[1]);
        Vec3 eta = scale(direction(dim, &u[2 + dd]), r * (1.0 - u[1]));
        double S = nrm(xi) + nrm(eta) + nrm(sub(xi, eta));
        best = std::min(best, phase(pp, xi, eta) / (S * (1.0 + S)));
    }
    return best;
}

ParallelCheck parallel_resonance_check(double eps, double eta_mag) {
    const Vec3 eta{eta_mag, 0.0, 0.0};
    const Vec3 xi{eps * eta_mag, 0.0, 0.0};
    ParallelCheck c;
    c.lhs = phase(PhaseSpec{-1, 1}, xi, eta);
    c.rhs = -3.0 * eps * eta_mag * eta_mag * eta_mag / (2.0 * std::sqrt(2.0));
    c.relative_error = std::abs(c.lhs - c.rhs) / std::abs(c.rhs);
    return c;
}

ParallelCheck quadratic_phase_check(double eps, double eta_mag) {
    const double e = eps * eta_mag;
    ParallelCheck c;
    // |εη|² − |η|² + |(1−ε)η|² = −2ε(1−ε)|η|², exact; the leading term is −2|η||ξ|
    c.lhs = e * e - eta_mag * eta_mag + (1.0 - eps) * (1.0 - eps) * eta_mag * eta_mag;
    c.rhs = -2.0 * eta_mag * e;
    c.relative_error = std::abs(c.lhs - c.rhs) / std::abs(c.rhs);
    return c;
}

// ---------------------------------------------------------------- five cases

int classify_case(const Vec3& xi, const Vec3& eta, const CaseThresholds& th) {
    const Vec3 zeta = sub(xi, eta);
    const double A = nrm(xi), B = nrm(eta), C = nrm(zeta);
    if (A == 0.0 || B == 0.0 || C == 0.0) {
        std::ostringstream os;
        os << "classify_case: degenerate input (|xi|=" << A << ", |eta|=" << B << ", |xi-eta|=" << C << ")";
        throw DegenerateInput(os.str());
    }
    const double M = std::max({A, B, C});
    const double ratio = B / A;
    if (ratio >= 1.0 / th.comparable && ratio <= th.comparable && A / C >= th.much) return 1;
    const double alpha = nrm(sub(unit(zeta), unit(xi)));
    if (alpha > th.angle) return 2;
    if (C >= th.unit) return 3;
    const double perp = nrm(cross(unit(xi), eta));
    if (perp * th.much <= M * B) return 4;
    return 5;
}

std::array<double, 5> case_weights(const Vec3& xi, const Vec3& eta, double M_block) {
    const Vec3 zeta = sub(xi, eta);
    const double A = nrm(xi), B = nrm(eta), C = nrm(zeta);
    double p1 = (A > 0.0 && C > 0.0) ? S_comparable(B / A) * S_much(A / C) : (C == 0.0 && B > 0.0 ? 1.0 : 0.0);
    double alpha = nrm(sub(unit(zeta), unit(xi)));
    const double sqrt3 = std::sqrt(3.0);
    double p2 = smooth_step((alpha - 1.5) / (sqrt3 - 1.5));
    double p3 = smooth_step(2.0 * C - 1.0);
    double perp = nrm(cross(unit(xi), eta));
    double p4 = B > 0.0 ? S_little(perp / (M_block * B)) : 1.0;
    std::array<double, 5> w{};
    double rest = 1.0;
    const double p[4] = {p1, p2, p3, p4};
    for (int i = 0; i < 4; ++i) {
        w[i] = rest * p[i];
        rest *= 1.0 - p[i];
    }
    w[4] = rest;
    return w;
}

// ---------------------------------------------------------------- block norms

double DyadicBlock::M() const { return std::max({a, b, c}); }
double DyadicBlock::m() const { return std::min({a, b, c}); }
double DyadicBlock::l() const { return std::min(b, c); }

bool admissible(const DyadicBlock& blk) {
    if (!(blk.a > 0.0 && blk.b > 0.0 && blk.c > 0.0)) return false;
    std::array<double, 3> v{blk.a, blk.b, blk.c};
    std::sort(v.begin(), v.end());
    return v[2] <= 4.0 * v[1];
}

std::string kind_label(SymbolKind k) {
    switch (k) {
        case SymbolKind::B3_T: return "B3_T";
        case SymbolKind::B1_X: return "B1_X";
        case SymbolKind::B2_X: return "B2_X";
    }
    return "?";
}

SymbolKind parse_kind(const std::string& s) {
    if (s == "B3_T") return SymbolKind::B3_T;
    if (s == "B1_X") return SymbolKind::B1_X;
    if (s == "B2_X") return SymbolKind::B2_X;
    throw InvalidArgument("unknown symbol kind '" + s + "' (expected B3_T, B1_X or B2_X)");
}

Region parse_region(const std::string& s) {
    if (s == "all") return Region::all;
    if (s == "time_nonresonant") return Region::time_nonresonant;
    if (s == "space_nonresonant") return Region::space_nonresonant;
    throw InvalidArgument("unknown region '" + s + "' (expected all, time_nonresonant or space_nonresonant)");
}

namespace {

struct SymbolContext {
    const SymbolUnderTest& sym;
    const DyadicBlock& blk;
    int d;
    double h_inner;

    double region_weight(const Vec3& xi, const Vec3& eta) const {
        if (sym.region == Region::all) return 1.0;
        auto w = case_weights(xi, eta, blk.M());
        return sym.region == Region::time_nonresonant ? w[0] + w[1] + w[3] : w[2] + w[4];
    }

    double multiplier(const Vec3& eta, const Vec3& zeta) const {
        switch (sym.multiplier) {
            case Multiplier::bracket_M_squared: return 1.0 + blk.M() * blk.M();
            case Multiplier::normal_form:
                return (sym.alpha - 1.0) * dot(eta, zeta) / (2.0 * (2.0 + dot(eta, eta) + dot(zeta, zeta)));
            case Multiplier::zero: return 0.0;
        }
        return 0.0;
    }

    double cut(const Vec3& xi, const Vec3& eta, const Vec3& zeta) const {
        return spectral::block_cutoff(nrm(xi), blk.a) * spectral::block_cutoff(nrm(eta), blk.b) *
               spectral::block_cutoff(nrm(zeta), blk.c);
    }

    // 𝓑₃ (scalar) or 𝓑₁ (vector) at (ξ, η); returns component count
    int base(const Vec3& xi, const Vec3& eta, double* out) const {
        const Vec3 zeta = sub(xi, eta);
        const double ct = cut(xi, eta, zeta);
        if (sym.constant) {
            out[0] = ct;
            return 1;
        }
        if (ct == 0.0) {
            for (int i = 0; i < 3; ++i) out[i] = 0.0;
            return sym.kind == SymbolKind::B3_T ? 1 : d;
        }
        const double w = region_weight(xi, eta);
        const double pref = symbol_U(nrm(xi)) * multiplier(eta, zeta) * ct * w;
        if (sym.kind == SymbolKind::B3_T) {
            out[0] = pref == 0.0 ? 0.0 : pref / phase(sym.phase, xi, eta);
            return 1;
        }
        Vec3 g = grad_eta(sym.phase, xi, eta);
        double g2 = dot(g, g);
        for (int i = 0; i < d; ++i) out[i] = pref == 0.0 ? 0.0 : pref * g[i] / g2;
        return d;
    }

    // full symbol, including the η-divergence for 𝓑₂
    int eval(const Vec3& xi, const Vec3& eta, double* out) const {
        if (sym.kind != SymbolKind::B2_X || sym.constant) return base(xi, eta, out);
        double div = 0.0;
        const double wts[4] = {1.0, -8.0, 8.0, -1.0};
        const double offs[4] = {-2.0, -1.0, 1.0, 2.0};
        double tmp[3];
        for (int ax = 0; ax < d; ++ax) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                Vec3 e = eta;
                e[ax] += offs[k] * h_inner;
                base(xi, e, tmp);
                acc += wts[k] * tmp[ax];
            }
            div += acc / (12.0 * h_inner);
        }
        out[0] = div;
        return 1;
    }
};

// ∫ density(node) over the η-support of the block, ξ = (A,0,0), for one integer order s
struct Integrand {
    const SymbolContext& ctx;
    int order;  // 0, 1 or 2
    double h_outer;

    // returns |∂^order f|² summed over components, or NaN
    double operator()(const Vec3& xi, const Vec3& eta) const {
        double f0[3];
        const int nc = ctx.eval(xi, eta, f0);
        if (order == 0) {
            double s = 0.0;
            for (int c = 0; c < nc; ++c) s += f0[c] * f0[c];
            return s;
        }
        const double h = h_outer;
        double grad2 = 0.0, lap[3] = {0.0, 0.0, 0.0};
        double fp[4][3];
        const double offs[4] = {-2.0, -1.0, 1.0, 2.0};
        for (int ax = 0; ax < ctx.d; ++ax) {
            for (int k = 0; k < 4; ++k) {
                Vec3 e = eta;
                e[ax] += offs[k] * h;
                ctx.eval(xi, e, fp[k]);
            }
            for (int c = 0; c < nc; ++c) {
                if (order == 1) {
                    double g = (fp[0][c] - 8.0 * fp[1][c] + 8.0 * fp[2][c] - fp[3][c]) / (12.0 * h);
                    grad2 += g * g;
                } else {
                    lap[c] += (-fp[0][c] + 16.0 * fp[1][c] - 30.0 * f0[c] + 16.0 * fp[2][c] - fp[3][c]) / (12.0 * h * h);
                }
            }
        }
        if (order == 1) return grad2;
        double s = 0.0;
        for (int c = 0; c < nc; ++c) s += lap[c] * lap[c];
        return s;
    }
};

// Gauss–Legendre nodes/weights on [−1,1]
void gl_rule(int n, std::vector<double>& x, std::vector<double>& w) {
    x.clear();
    w.clear();
    auto push = [&](const auto& absc, const auto& wts, bool odd) {
        for (std::size_t i = 0; i < absc.size(); ++i) {
            if (odd && i == 0) {
                x.push_back(0.0);
                w.push_back(wts[0]);
                continue;
            }
            x.push_back(absc[i]);
            w.push_back(wts[i]);
            x.push_back(-absc[i]);
            w.push_back(wts[i]);
        }
    };
    using boost::math::quadrature::gauss;
    switch (n) {
        case 4: push(gauss<double, 4>::abscissa(), gauss<double, 4>::weights(), false); break;
        case 6: push(gauss<double, 6>::abscissa(), gauss<double, 6>::weights(), false); break;
        case 8: push(gauss<double, 8>::abscissa(), gauss<double, 8>::weights(), false); break;
        case 10: push(gauss<double, 10>::abscissa(), gauss<double, 10>::weights(), false); break;
        case 16: push(gauss<double, 16>::abscissa(), gauss<double, 16>::weights(), false); break;
        default: throw InvalidArgument("block_norm: nodes_per_piece must be 4, 6, 8, 10 or 16");
    }
}

struct Node {
    double rho, theta, weight;
};

std::vector<double> angular_breaks(double theta_min, double ratio) {
    std::vector<double> lo{0.0};
    for (double t = theta_min; t < 0.5 * kPi; t *= ratio) lo.push_back(t);
    std::vector<double> br = lo;
    br.push_back(0.5 * kPi);
    for (auto it = lo.rbegin(); it != lo.rend(); ++it) br.push_back(kPi - *it);
    return br;
}

double integrate_order(const SymbolContext& ctx, const NormConfig& cfg, double A, int order) {
    const DyadicBlock& blk = ctx.blk;
    const int d = cfg.dim;
    const bool zeta_centred = blk.c < blk.b;
    const double ell = zeta_centred ? blk.c : blk.b;
    const double M = blk.M();
    const Vec3 xi{A, 0.0, 0.0};

    std::vector<double> gx, gw;
    gl_rule(cfg.nodes_per_piece, gx, gw);
    std::vector<double> ang_gx, ang_gw;
    gl_rule(6, ang_gx, ang_gw);

    // radial pieces, logarithmic in (ℓ/2, 2ℓ)
    std::vector<std::pair<double, double>> radial;  // node, weight
    const double u0 = std::log(0.5 * ell), u1 = std::log(2.0 * ell);
    const double du = (u1 - u0) / cfg.radial_pieces;
    for (int p = 0; p < cfg.radial_pieces; ++p) {
        double ua = u0 + p * du;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            double u = ua + 0.5 * du * (gx[i] + 1.0);
            double rho = std::exp(u);
            radial.push_back({rho, 0.5 * du * gw[i] * rho});
        }
    }

    std::vector<std::pair<double, double>> angular;
    if (d == 1) {
        angular = {{0.0, 1.0}, {kPi, 1.0}};
    } else {
        const double theta_min = std::min(0.05, std::max(1e-9, M / 1024.0));
        auto br = angular_breaks(theta_min, cfg.angle_ratio);
        for (std::size_t p = 0; p + 1 < br.size(); ++p) {
            double ta = br[p], tb = br[p + 1];
            for (std::size_t i = 0; i < ang_gx.size(); ++i) {
                double th = ta + 0.5 * (tb - ta) * (ang_gx[i] + 1.0);
                double w = 0.5 * (tb - ta) * ang_gw[i];
                angular.push_back({th, d == 3 ? 2.0 * kPi * std::sin(th) * w : 2.0 * w});
            }
        }
    }

    double total = 0.0;
    bool any_support = false;
    for (const auto& [rho0, wr] : radial) {
        const double radial_weight = d == 3 ? rho0 * rho0 : d == 2 ? rho0 : 1.0;
        for (const auto& [th0, wa] : angular) {
            double val = std::numeric_limits<double>::quiet_NaN();
            double rho = rho0, th = th0;
            for (int attempt = 0; attempt <= 5; ++attempt) {
                if (attempt > 0) {
                    double j = 1e-7 * attempt;
                    rho = rho0 * (1.0 + j);
                    th = d == 1 ? th0 : th0 + j * std::max(th0, 1e-6) * (th0 < 0.5 * kPi ? 1.0 : -1.0);
                }
                Vec3 dir{std::cos(th), std::sin(th), 0.0};
                Vec3 eta = zeta_centred ? sub(xi, scale(dir, rho)) : scale(dir, rho);
                const double scale_len = rho * std::min(1.0, M) / 8.0;
                SymbolContext local{ctx.sym, ctx.blk, ctx.d, 1e-3 * scale_len};
                Integrand f{local, order, 4e-3 * scale_len};
                const Vec3 zeta = sub(xi, eta);
                if (!any_support && local.cut(xi, eta, zeta) > 0.0) any_support = true;
                val = f(xi, eta);
                if (std::isfinite(val)) break;
            }
            if (!std::isfinite(val)) {
                std::ostringstream os;
                os << "block_norm: symbol singular near rho=" << rho0 << ", theta=" << th0 << " (a=" << blk.a
                   << ", b=" << blk.b << ", c=" << blk.c << ") after 5 jittered retries";
                throw NonFinite(os.str());
            }
            total += val * wr * wa * radial_weight;
        }
    }
    if (!any_support) {
        std::ostringstream os;
        os << "block_norm: empty block intersection (a=" << blk.a << ", b=" << blk.b << ", c=" << blk.c << ")";
        throw InvalidArgument(os.str());
    }
    return total;
}

double integer_norm(const SymbolUnderTest& sym, const DyadicBlock& blk, int order, const NormConfig& cfg) {
    SymbolContext ctx{sym, blk, cfg.dim, 0.0};
    double best = 0.0;
    const int n = std::max(1, cfg.xi_samples);
    for (int k = 0; k < n; ++k) {
        double A = n == 1 ? blk.a : blk.a * std::pow(2.0, -0.25 + 0.5 * k / (n - 1));
        best = std::max(best, std::sqrt(integrate_order(ctx, cfg, A, order)));
    }
    return best;
}

}  // namespace

double block_norm(const SymbolUnderTest& sym, const DyadicBlock& blk, double s, const NormConfig& cfg) {
    if (!(s >= 0.0 && s <= 2.0)) throw InvalidArgument("block_norm: s must lie in [0, 2]");
    if (cfg.dim < 1 || cfg.dim > 3) throw InvalidArgument("block_norm: dim must be 1, 2 or 3");
    if (!admissible(blk)) {
        std::ostringstream os;
        os << "block_norm: block (a=" << blk.a << ", b=" << blk.b << ", c=" << blk.c
           << ") is not admissible (largest two must be comparable)";
        throw InvalidArgument(os.str());
    }
    const int lo = static_cast<int>(std::floor(s)), hi = static_cast<int>(std::ceil(s));
    const double nlo = integer_norm(sym, blk, lo, cfg);
    if (hi == lo) return nlo;
    const double nhi = integer_norm(sym, blk, hi, cfg);
    if (nlo == 0.0 || nhi == 0.0) return 0.0;
    const double t = s - lo;
    return std::exp((1.0 - t) * std::log(nlo) + t * std::log(nhi));
}

ExponentFit fit_exponents(const SymbolUnderTest& sym, const std::vector<DyadicBlock>& ladder, double s,
                          const NormConfig& cfg, int threads) {
    if (ladder.size() < 4) throw InvalidArgument("fit_exponents: ladder needs at least 4 blocks");
    ExponentFit out;
    out.norms.assign(ladder.size(), 0.0);
    std::vector<std::string> errors(ladder.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < ladder.size(); i = next++) {
            try {
                out.norms[i] = block_norm(sym, ladder[i], s, cfg);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                out.norms[i] = std::numeric_limits<double>::quiet_NaN();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(ladder.size())));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<std::size_t> use;
    for (std::size_t i = 0; i < ladder.size(); ++i)
        if (std::isfinite(out.norms[i]) && out.norms[i] > 0.0) use.push_back(i);
    if (use.size() < 4) {
        std::ostringstream os;
        os << "fit_exponents: only " << use.size() << " usable ladder points";
        for (auto& e : errors)
            if (!e.empty()) {
                os << " (" << e << ")";
                break;
            }
        throw InvalidArgument(os.str());
    }

    // design columns log ℓ, log M, log a; constant columns dropped, identical ones merged
    const std::size_t n = use.size();
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& b = ladder[use[r]];
        cols[0][r] = std::log(b.l());
        cols[1][r] = std::log(b.M());
        cols[2][r] = std::log(b.a);
        y[r] = std::log(out.norms[use[r]]);
    }
    auto varies = [&](const std::vector<double>& c) {
        for (double v : c)
            if (std::abs(v - c[0]) > 1e-12) return true;
        return false;
    };
    auto same = [&](const std::vector<double>& p, const std::vector<double>& q) {
        for (std::size_t r = 0; r < n; ++r)
            if (std::abs(p[r] - q[r]) > 1e-12) return false;
        return true;
    };
    std::vector<int> owner(3, -1);  // fitted column each parameter maps to
    std::vector<std::vector<double>> X;
    for (int j = 0; j < 3; ++j) {
        if (!varies(cols[j])) continue;
        for (int k = 0; k < j; ++k)
            if (owner[k] >= 0 && same(cols[j], cols[k])) {
                owner[j] = owner[k];
                out.tied = true;
            }
        if (owner[j] < 0) {
            owner[j] = static_cast<int>(X.size());
            X.push_back(cols[j]);
        }
    }
    if (X.empty()) throw InvalidArgument("fit_exponents: ladder does not vary l, M or a");
    const std::size_t p = X.size() + 1;
    if (n < p + 1) throw InvalidArgument("fit_exponents: too few points for the varied parameters");

    // normal equations on centred columns
    std::vector<double> mean(X.size());
    double ym = 0;
    for (double v : y) ym += v;
    ym /= n;
    for (std::size_t j = 0; j < X.size(); ++j) {
        for (double v : X[j]) mean[j] += v;
        mean[j] /= n;
    }
    const std::size_t q = X.size();
    std::vector<double> G(q * q, 0.0), rhs(q, 0.0);
    for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t r = 0; r < n; ++r) rhs[i] += (X[i][r] - mean[i]) * (y[r] - ym);
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t r = 0; r < n; ++r) G[i * q + j] += (X[i][r] - mean[i]) * (X[j][r] - mean[j]);
    }
    // Gauss–Jordan inverse of G (q ≤ 3)
    std::vector<double> inv(q * q, 0.0);
    for (std::size_t i = 0; i < q; ++i) inv[i * q + i] = 1.0;
    for (std::size_t c = 0; c < q; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < q; ++r)
            if (std::abs(G[r * q + c]) > std::abs(G[piv * q + c])) piv = r;
        if (std::abs(G[piv * q + c]) < 1e-14) throw InvalidArgument("fit_exponents: varied parameters are collinear");
        for (std::size_t k = 0; k < q; ++k) {
            std::swap(G[c * q + k], G[piv * q + k]);
            std::swap(inv[c * q + k], inv[piv * q + k]);
        }
        double dv = G[c * q + c];
        for (std::size_t k = 0; k < q; ++k) G[c * q + k] /= dv, inv[c * q + k] /= dv;
        for (std::size_t r = 0; r < q; ++r) {
            if (r == c) continue;
            double f = G[r * q + c];
            for (std::size_t k = 0; k < q; ++k) G[r * q + k] -= f * G[c * q + k], inv[r * q + k] -= f * inv[c * q + k];
        }
    }
    std::vector<double> beta(q, 0.0);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) beta[i] += inv[i * q + j] * rhs[j];
    double sse = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        double pred = ym;
        for (std::size_t j = 0; j < q; ++j) pred += beta[j] * (X[j][r] - mean[j]);
        sse += (y[r] - pred) * (y[r] - pred);
    }
    out.residual = std::sqrt(sse / n);
    const double sigma2 = n > p ? sse / (n - p) : 0.0;
    for (std::size_t j = 0; j < q; ++j) out.stderr_slope = std::max(out.stderr_slope, std::sqrt(sigma2 * inv[j * q + j]));

    if (owner[0] >= 0) out.fitted_l = true, out.exponent_l = beta[owner[0]];
    if (owner[1] >= 0) out.fitted_M = true, out.exponent_M = beta[owner[1]];
    if (owner[2] >= 0) out.fitted_a = true, out.exponent_a = beta[owner[2]];
    return out;
}

}  // namespace ek::resonance

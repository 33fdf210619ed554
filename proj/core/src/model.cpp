#include "ek/model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <sstream>

#include "ek/error.hpp"
#include "ek/symbols.hpp"

namespace ek::model {

using spectral::cplx;
using spectral::Space;

CapillarityLaw quantum_capillarity(double kappa) {
    if (!(kappa > 0.0)) throw InvalidArgument("quantum capillarity: kappa must be positive");
    CapillarityLaw c;
    c.label = CapillarityLaw::Label::quantum;
    c.kappa = kappa;
    c.K = [kappa](double r) { return kappa / r; };
    c.Kp = [kappa](double r) { return -kappa / (r * r); };
    return c;
}

CapillarityLaw constant_capillarity(double K0) {
    if (!(K0 > 0.0)) throw InvalidArgument("constant capillarity: K0 must be positive");
    CapillarityLaw c;
    c.label = CapillarityLaw::Label::constant;
    c.K0 = K0;
    c.K = [K0](double) { return K0; };
    c.Kp = [](double) { return 0.0; };
    return c;
}

CapillarityLaw custom_capillarity(std::function<double(double)> K, std::function<double(double)> Kp) {
    CapillarityLaw c;
    c.label = CapillarityLaw::Label::custom;
    c.K = std::move(K);
    c.Kp = std::move(Kp);
    return c;
}

PressureLaw power_pressure(double coeff, double gamma, double rho_c) {
    PressureLaw p;
    p.label = PressureLaw::Label::power;
    p.coeff = coeff;
    p.gamma = gamma;
    const double ref = std::pow(rho_c, gamma);
    p.g = [=](double r) { return coeff * (std::pow(r, gamma) - ref); };
    p.gp = [=](double r) { return coeff * gamma * std::pow(r, gamma - 1.0); };
    p.gpp = [=](double r) { return coeff * gamma * (gamma - 1.0) * std::pow(r, gamma - 2.0); };
    return p;
}

PressureLaw custom_pressure(std::function<double(double)> g, std::function<double(double)> gp) {
    PressureLaw p;
    p.label = PressureLaw::Label::custom;
    p.g = std::move(g);
    p.gp = std::move(gp);
    return p;
}

namespace {

void check_admissible(const ModelParams& p, double rho, const char* op) {
    if (!(rho >= p.rho_min * (1.0 - 1e-14) && rho <= p.rho_max * (1.0 + 1e-14))) {
        std::ostringstream os;
        os << op << ": density " << rho << " outside admissible interval [" << p.rho_min << ", "
           << p.rho_max << "]";
        throw VacuumProximity(os.str());
    }
}

double ell_unchecked(const ModelParams& p, double rho) {
    using Label = CapillarityLaw::Label;
    switch (p.capillarity.label) {
        case Label::quantum:
            return 1.0 + std::sqrt(p.k_factor * p.capillarity.kappa) * std::log(rho / p.rho_c);
        case Label::constant:
            return 1.0 + 2.0 * std::sqrt(p.k_factor * p.capillarity.K0) *
                             (std::sqrt(rho) - std::sqrt(p.rho_c));
        case Label::custom:
            break;
    }
    auto f = [&p](double s) { return std::sqrt(p.K(s) / s); };
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, p.rho_c, rho, 20,
                                                                             1e-14, &err);
    return 1.0 + v;
}

}  // namespace

double ell_prime(const ModelParams& p, double rho) { return std::sqrt(p.K(rho) / rho); }

double ell_of_rho(const ModelParams& p, double rho) {
    check_admissible(p, rho, "ell_of_rho");
    return ell_unchecked(p, rho);
}

std::pair<double, double> ell_range(const ModelParams& p) {
    return {ell_unchecked(p, p.rho_min), ell_unchecked(p, p.rho_max)};
}

double rho_of_ell(const ModelParams& p, double L) {
    auto [lo_L, hi_L] = ell_range(p);
    if (!(L >= lo_L - 1e-13 && L <= hi_L + 1e-13)) {
        std::ostringstream os;
        os << "rho_of_ell: L = " << L << " outside image [" << lo_L << ", " << hi_L
           << "] of the admissible density interval";
        throw VacuumProximity(os.str());
    }
    return rho_of_ell_unchecked(p, L);
}

double rho_of_ell_unchecked(const ModelParams& p, double L) {
    using Label = CapillarityLaw::Label;
    if (p.capillarity.label == Label::quantum)
        return p.rho_c * std::exp((L - 1.0) / std::sqrt(p.k_factor * p.capillarity.kappa));
    if (p.capillarity.label == Label::constant) {
        double s = std::sqrt(p.rho_c) + (L - 1.0) / (2.0 * std::sqrt(p.k_factor * p.capillarity.K0));
        return s * s;
    }
    // safeguarded Newton on the bracket [rho_min, rho_max]; ℒ is increasing
    double a = p.rho_min, b = p.rho_max;
    double x = p.rho_c;
    for (int it = 0; it < 100; ++it) {
        double F = ell_unchecked(p, x) - L;
        if (std::abs(F) <= 1e-13) return x;
        if (F > 0.0) b = x; else a = x;
        double xn = x - F / ell_prime(p, x);
        if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
        if (std::abs(xn - x) <= 1e-15 * std::abs(x)) return xn;
        x = xn;
    }
    throw ConvergenceFailure("rho_of_ell: Newton iteration did not converge in 100 steps");
}

double sound_coefficient_a(const ModelParams& p, double rho) {
    check_admissible(p, rho, "sound_coefficient_a");
    return std::sqrt(rho * p.K(rho));
}

double a_of_ell(const ModelParams& p, double L) {
    if (p.capillarity.label == CapillarityLaw::Label::quantum)
        return std::sqrt(p.k_factor * p.capillarity.kappa);
    double rho = rho_of_ell(p, L);
    return std::sqrt(rho * p.K(rho));
}

double gtilde(const ModelParams& p, double L) { return p.g(rho_of_ell(p, L)); }

double gtilde_prime(const ModelParams& p, double L) {
    double rho = rho_of_ell(p, L);
    return p.gp(rho) / ell_prime(p, rho);
}

double alpha_of(const ModelParams& p) {
    // ã′(1) = a′(ρ_c)/ℒ′(ρ_c), a′ = (K + ρK′)/(2√(ρK))
    const double r = p.rho_c;
    const double K = p.K(r), Kp = p.Kp(r);
    const double ap = (K + r * Kp) / (2.0 * std::sqrt(r * K));
    return ap / ell_prime(p, r);
}

double gtilde_second_of(const ModelParams& p) {
    const double r = p.rho_c;
    if (p.pressure.gpp) {
        // ρ(L): ρ′ = q(ρ) = √(ρ/K), ρ″ = q·q′
        const double K = p.K(r), Kp = p.Kp(r);
        const double q = std::sqrt(r / K);
        const double qp = 0.5 / q * (K - r * Kp) / (K * K);
        return p.g_factor * p.pressure.gpp(r) * q * q + p.gp(r) * q * qp;
    }
    const double h = 1e-4;
    return (gtilde(p, 1.0 + h) - 2.0 * gtilde(p, 1.0) + gtilde(p, 1.0 - h)) / (h * h);
}

ModelParams make_params(double rho_c, CapillarityLaw cap, PressureLaw pres, double lo, double hi) {
    if (!(rho_c > 0.0)) throw InvalidArgument("model: rho_c must be positive");
    if (!(lo > 0.0 && lo < 1.0 && hi > 1.0)) throw InvalidArgument("model: admissible interval must contain rho_c");
    ModelParams p;
    p.rho_c = rho_c;
    p.capillarity = std::move(cap);
    p.pressure = std::move(pres);
    p.rho_min = lo * rho_c;
    p.rho_max = hi * rho_c;
    if (!(p.K(rho_c) > 0.0)) throw InvalidArgument("model: K(rho_c) must be positive");
    p.alpha = alpha_of(p);
    p.gtilde_second = gtilde_second_of(p);
    return p;
}

ModelParams normalize(const ModelParams& raw) {
    const double r = raw.rho_c;
    const double gp = raw.gp(r);
    if (!(gp > 0.0)) {
        std::ostringstream os;
        os << "stability condition violated (requires g'(rho_c) > 0): g'(" << r
           << ") = " << gp;
        throw StabilityViolation(os.str());
    }
    // K → K/Φ² with Φ = a(ρ_c); g → λg with λ fixing g̃′(1) = 2; t → τ t, x → X x, X² = Φτ
    const double phi_scale = std::sqrt(r * raw.K(r));
    ModelParams p = raw;
    p.k_factor = raw.k_factor / (phi_scale * phi_scale);
    const double gt_prime = gp / ell_prime(p, r);
    const double lambda = 2.0 / gt_prime;
    p.g_factor = raw.g_factor * lambda;
    p.scales.potential = phi_scale;
    p.scales.time = lambda * phi_scale;
    p.scales.space = std::sqrt(phi_scale * p.scales.time);
    p.normalized = true;
    p.alpha = alpha_of(p);
    p.gtilde_second = gtilde_second_of(p);
    return p;
}

namespace {

void require_real_physical(const Field& f, const char* op) {
    if (f.space != Space::physical || f.components != 1)
        throw InvalidArgument(std::string(op) + ": scalar physical field expected");
}

Field real_physical(const Field& f) {
    Field out = spectral::to_physical(f);
    for (auto& v : out.values) v = cplx(v.real(), 0.0);
    return out;
}

}  // namespace

StateBundle to_analytic(const ModelParams& p, const Field& rho, const Field& phi) {
    require_real_physical(rho, "to_analytic");
    require_real_physical(phi, "to_analytic");
    StateBundle b;
    b.rho = real_physical(rho);
    double rmin = b.rho.values.empty() ? 0.0 : b.rho.values[0].real();
    for (auto v : b.rho.values) rmin = std::min(rmin, v.real());
    if (!(rmin > 0.0)) throw VacuumProximity("to_analytic: vacuum (min rho <= 0)");
    b.l = b.rho;
    for (auto& v : b.l.values) v = cplx(ell_of_rho(p, v.real()) - 1.0, 0.0);

    Field phihat = spectral::to_fourier(real_physical(phi));
    phihat.values[0] = 0.0;  // zero-mean convention
    b.phi = real_physical(phihat);
    b.u = spectral::to_physical(spectral::gradient(phihat));
    for (auto& v : b.u.values) v = cplx(v.real(), 0.0);

    Field psi = spectral::apply_radial(phihat, propagator::symbol_U);
    Field lhat = spectral::to_fourier(b.l);
    spectral::axpy(psi, cplx(0.0, 1.0), lhat);
    b.psi = psi;
    return b;
}

StateBundle from_analytic(const ModelParams& p, const Field& psi) {
    StateBundle b;
    Field psihat = spectral::to_fourier(psi);
    Field phi1 = spectral::real_part_fourier(psihat);
    b.zero_mode_flag = std::abs(phi1.values[0]) > 1e-12;
    Field phihat = spectral::apply_radial(phi1, propagator::symbol_U_inv);
    b.phi = real_physical(phihat);
    b.u = spectral::to_physical(spectral::gradient(phihat));
    for (auto& v : b.u.values) v = cplx(v.real(), 0.0);
    b.l = real_physical(spectral::imag_part_fourier(psihat));
    b.rho = b.l;
    for (auto& v : b.rho.values) v = cplx(rho_of_ell(p, 1.0 + v.real()), 0.0);
    b.psi = psihat;
    return b;
}

double madelung_phase_factor(const ModelParams& p) {
    if (p.capillarity.label != CapillarityLaw::Label::quantum)
        throw InvalidArgument("madelung_wavefunction: requires the quantum capillarity law K = kappa/rho");
    return 1.0 / (2.0 * std::sqrt(p.k_factor * p.capillarity.kappa));
}

Field madelung_wavefunction(const ModelParams& p, const StateBundle& b) {
    const double factor = madelung_phase_factor(p);
    Field out = b.rho;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::polar(std::sqrt(b.rho.values[i].real()), factor * b.phi.values[i].real());
    return out;
}

CriticalExponents critical_exponents(int d) {
    if (d < 1) throw InvalidArgument("critical_exponents: d must be >= 1");
    const double dd = d;
    return {(std::sqrt(dd * dd + 12.0 * dd + 4.0) + dd + 2.0) / (2.0 * dd),
            (std::sqrt(2.0 * dd + 1.0) + dd + 1.0) / dd};
}

std::string describe(const ModelParams& p) {
    std::ostringstream os;
    os.precision(17);
    os << "rho_c=" << p.rho_c << " alpha=" << p.alpha << " gtilde''(1)=" << p.gtilde_second
       << " normalized=" << (p.normalized ? 1 : 0) << " k_factor=" << p.k_factor
       << " g_factor=" << p.g_factor;
    return os.str();
}

}  // namespace ek::model

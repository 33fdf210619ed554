#include "ek/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "config_reader.hpp"
#include "ek/error.hpp"
#include "ek/normalform.hpp"

namespace ek::scenario {

using config::json;
using config::Reader;
using spectral::cplx;
using spectral::Field;
using spectral::Space;

namespace {

constexpr double kPi = 3.14159265358979323846;

const std::vector<ExperimentInfo> kCatalog = {
    {ExperimentKind::run, "run", "evolve the initial state and write norm time series"},
    {ExperimentKind::dispersion_test, "dispersion-test", "linear L^p decay rates against t^(-d(1/2-1/p))"},
    {ExperimentKind::resonance_scan, "resonance-scan", "resonant-set geometry of the four phases"},
    {ExperimentKind::multiplier_fit, "multiplier-fit", "dyadic-ladder scaling exponents of block multiplier norms"},
    {ExperimentKind::normalform_check, "normalform-check", "symbol identity, gradient structure and order checks"},
    {ExperimentKind::energy_drift, "energy-drift", "linear energy, modified energy and mass along the flow"},
    {ExperimentKind::madelung_compare, "madelung-compare", "Euler-Korteweg solver against the Gross-Pitaevskii reference"},
    {ExperimentKind::scatter_probe, "scatter-probe", "Cauchy variation of the scattering profile over [t, 2t]"},
};

std::vector<double> snapshot_schedule(Reader& r) {
    if (r.has("times")) {
        if (r.has("t_end") || r.has("count") || r.has("spacing") || r.has("t_start"))
            throw ConfigError(r.where("times"), "give either an explicit list or t_start/t_end/count/spacing");
        auto t = r.require<std::vector<double>>("times");
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!(t[i] >= 0.0)) throw ConfigError(r.where("times"), "times must be non-negative");
            if (i > 0 && !(t[i] > t[i - 1])) throw ConfigError(r.where("times"), "times must be strictly increasing");
        }
        return t;
    }
    const std::string spacing = r.get_choice("spacing", "linear", {"linear", "log"});
    const double t_end = r.get<double>("t_end", 1.0);
    const double t_start = r.get<double>("t_start", spacing == "log" ? 1.0 : 0.0);
    const int count = r.get<int>("count", 11);
    if (count < 1) throw ConfigError(r.where("count"), "must be >= 1");
    if (!(t_end >= t_start) || t_start < 0.0) throw ConfigError(r.where("t_end"), "need 0 <= t_start <= t_end");
    if (spacing == "log" && !(t_start > 0.0)) throw ConfigError(r.where("t_start"), "log spacing needs t_start > 0");
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) {
        double f = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        t[i] = spacing == "log" ? t_start * std::pow(t_end / t_start, f) : t_start + (t_end - t_start) * f;
    }
    return t;
}

// minimal-image displacement on the torus
double wrap(double x, double L) {
    x = std::fmod(x, L);
    if (x >= 0.5 * L) x -= L;
    if (x < -0.5 * L) x += L;
    return x;
}

Field normalized_real(Field f) {
    double m = 0.0;
    for (auto& v : f.values) {
        v = cplx(v.real(), 0.0);
        m = std::max(m, std::abs(v.real()));
    }
    if (m > 0.0)
        for (auto& v : f.values) v /= m;
    return f;
}

Field shape(const Scenario& sc, const spectral::Grid& g) {
    const auto& in = sc.initial;
    const std::size_t np = g.size();
    Field f = Field::zeros(g, Space::physical);
    if (in.profile == "zero") return f;
    if (in.profile == "gaussian" || in.profile == "wave_packet") {
        for (std::size_t i = 0; i < np; ++i) {
            auto x = g.x(i);
            double r2 = 0.0, ph = 0.0;
            for (int a = 0; a < g.dim; ++a) {
                double dx = wrap(x[a] - in.center[a], g.L);
                r2 += dx * dx;
                if (in.profile == "wave_packet") ph += in.wavevector[a] * dx;
            }
            double v = std::exp(-r2 / (2.0 * in.width * in.width));
            if (in.profile == "wave_packet") v *= std::cos(ph);
            f.values[i] = v;
        }
        return f;
    }
    Field fh = Field::zeros(g, Space::fourier);
    if (in.profile == "bilaplacian_gaussian") {
        for (std::size_t i = 0; i < np; ++i) {
            auto k = g.xi(i);
            double r2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            double ph = 0.0;
            for (int a = 0; a < g.dim; ++a) ph -= k[a] * in.center[a];
            fh.values[i] = std::polar(r2 * r2 * std::exp(-0.5 * in.width * in.width * r2), ph);
        }
    } else {  // random_band_limited
        std::mt19937_64 rng(in.seed);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (std::size_t i = 0; i < np; ++i) {
            double re = U(rng), im = U(rng);
            if (g.xi_norm(i) <= in.band && g.xi_norm(i) > 0.0) fh.values[i] = cplx(re, im);
        }
    }
    return normalized_real(spectral::to_physical(fh));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() { return kCatalog; }

ExperimentKind parse_kind(const std::string& name) {
    for (const auto& e : kCatalog)
        if (e.name == name) return e.kind;
    std::string msg = "unknown experiment '" + name + "'; known:";
    for (const auto& e : kCatalog) msg += " " + e.name;
    throw ConfigError("/experiment", msg);
}

std::string kind_name(ExperimentKind k) {
    for (const auto& e : kCatalog)
        if (e.kind == k) return e.name;
    return "?";
}

spectral::NormKind parse_norm(const std::string& name) {
    try {
        if (name == "linf") return spectral::NormKind::lp(std::numeric_limits<double>::infinity());
        if (name.rfind("hdot", 0) == 0) return spectral::NormKind::hdot(std::stod(name.substr(4)));
        if (name.rfind("h", 0) == 0) return spectral::NormKind::hs(std::stod(name.substr(1)));
        if (name.rfind("w", 0) == 0) {
            auto comma = name.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("w needs k,p");
            std::string p = name.substr(comma + 1);
            double pv = p == "inf" ? std::numeric_limits<double>::infinity() : std::stod(p);
            return spectral::NormKind::wkp(std::stoi(name.substr(1, comma - 1)), pv);
        }
        if (name.rfind("l", 0) == 0) {
            double p = std::stod(name.substr(1));
            if (p < 1.0) throw std::invalid_argument("p < 1");
            return spectral::NormKind::lp(p);
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("/diagnostics/norms", "unknown norm '" + name + "' (linf, l<p>, h<s>, hdot<s>, w<k>,<p>)");
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json src;
    try {
        src = json::parse(text);
    } catch (const json::parse_error& e) {
        // translate the byte offset into line:column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++i) {
            if (text[i] == '\n') ++line, col = 1;
            else ++col;
        }
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col), "JSON syntax error");
    }
    json out = json::object();
    Reader r(src, out, "");
    Scenario sc;
    sc.origin = origin;
    sc.schema_version = r.require<int>("schema_version");
    if (sc.schema_version != kSchemaVersion)
        throw ConfigError("/schema_version", "unsupported version " + std::to_string(sc.schema_version) +
                                                 " (this build reads " + std::to_string(kSchemaVersion) + ")");
    sc.name = r.get<std::string>("name", "unnamed");
    sc.kind = parse_kind(r.require<std::string>("experiment"));
    sc.seed = r.get<std::uint64_t>("seed", 0);

    {
        Reader m = r.child("model");
        sc.model.rho_c = m.get_positive("rho_c", 1.0);
        sc.model.capillarity = m.get_choice("capillarity", "quantum", {"quantum", "constant"});
        if (sc.model.capillarity == "quantum") sc.model.kappa = m.get_positive("kappa", 1.0);
        else sc.model.K0 = m.get_positive("K0", 1.0);
        sc.model.pressure = m.get_choice("pressure", "power", {"power"});
        sc.model.coeff = m.get<double>("coeff", 2.0);
        sc.model.gamma = m.get<double>("gamma", 1.0);
        sc.model.rho_lo = m.get_positive("rho_lo", 0.5);
        sc.model.rho_hi = m.get_positive("rho_hi", 2.0);
        if (!(sc.model.rho_lo < 1.0 && sc.model.rho_hi > 1.0))
            throw ConfigError(m.where("rho_lo"), "admissible interval must contain rho_c (rho_lo < 1 < rho_hi)");
        m.finish();
    }
    {
        Reader g = r.child("grid");
        sc.dim = g.get<int>("dim", 1);
        sc.n = g.get<int>("n", 256);
        if (g.has("L") && g.has("L_over_pi")) throw ConfigError(g.where("L"), "give L or L_over_pi, not both");
        if (g.has("L")) sc.L = g.get_positive("L", 1.0);
        else sc.L = kPi * g.get_positive("L_over_pi", 32.0);
        if (sc.dim < 1 || sc.dim > 3) throw ConfigError(g.where("dim"), "must be 1, 2 or 3");
        if (sc.n < 8 || sc.n % 2) throw ConfigError(g.where("n"), "must be even and >= 8");
        g.finish();
    }
    {
        Reader in = r.child("initial");
        auto& s = sc.initial;
        s.profile = in.get_choice("profile", "gaussian",
                                  {"gaussian", "wave_packet", "random_band_limited", "bilaplacian_gaussian", "zero"});
        s.amplitude = in.get<double>("amplitude", 1e-3);
        s.phi_amplitude = in.get<double>("phi_amplitude", 0.0);
        if (s.profile != "random_band_limited" && s.profile != "zero") {
            s.width = in.get_positive("width", 3.0);
            s.center = in.get<std::vector<double>>("center", std::vector<double>(sc.dim, 0.5 * sc.L));
            if (static_cast<int>(s.center.size()) != sc.dim)
                throw ConfigError(in.where("center"), "needs one entry per dimension");
        }
        if (s.profile == "wave_packet") {
            s.wavevector = in.require<std::vector<double>>("wavevector");
            if (static_cast<int>(s.wavevector.size()) != sc.dim)
                throw ConfigError(in.where("wavevector"), "needs one entry per dimension");
        }
        if (s.profile == "random_band_limited") {
            s.band = in.get_positive("band", 1.0);
            s.seed = in.require<std::uint64_t>("seed");
        }
        in.finish();
    }
    {
        Reader it = r.child("integrator");
        auto& c = sc.integrator;
        c.scheme = it.get_choice("scheme", "exponential_rk4", {"exponential_rk4", "strang_splitting"}) == "strang_splitting"
                       ? propagator::Scheme::strang_splitting
                       : propagator::Scheme::exponential_rk4;
        c.dt = it.get_positive("dt", 0.05);
        c.dealias_fraction = it.get<double>("dealias_fraction", 2.0 / 3.0);
        if (!(c.dealias_fraction > 0.0 && c.dealias_fraction <= 1.0))
            throw ConfigError(it.where("dealias_fraction"), "must lie in (0, 1]");
        c.amplitude_guard = it.get<double>("amplitude_guard", 0.25);
        if (c.amplitude_guard < 0.0) throw ConfigError(it.where("amplitude_guard"), "must be >= 0 (0 disables)");
        c.nonlinear = it.get<bool>("nonlinear", true);
        it.finish();
    }
    {
        Reader d = r.child("diagnostics");
        Reader s = d.child("snapshots");
        sc.integrator.snapshot_times = snapshot_schedule(s);
        s.finish();
        sc.norms = d.get<std::vector<std::string>>("norms", {"linf", "l2"});
        for (const auto& nm : sc.norms) parse_norm(nm);
        d.finish();
    }
    {
        const json empty = json::object();
        const json& p = src.contains("params") ? src.at("params") : empty;
        out["params"] = config::resolve_params(kind_name(sc.kind), p);
        sc.params_json = out["params"].dump();
        // mark as consumed
        r.get<json>("params", json::object());
        out["params"] = json::parse(sc.params_json);
    }
    r.finish();
    sc.resolved_json = out.dump(2);
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(path.string(), "cannot open scenario file");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str(), path.string());
}

void apply_seed_override(Scenario& sc, std::uint64_t seed) {
    json j = json::parse(sc.resolved_json);
    j["seed"] = seed;
    if (j["initial"].contains("seed")) j["initial"]["seed"] = seed;
    const std::string origin = sc.origin;
    sc = parse_scenario(j.dump(), origin);
}

model::ModelParams build_model(const Scenario& sc) {
    const auto& m = sc.model;
    auto cap = m.capillarity == "quantum" ? model::quantum_capillarity(m.kappa) : model::constant_capillarity(m.K0);
    auto pres = model::power_pressure(m.coeff, m.gamma, m.rho_c);
    auto raw = model::make_params(m.rho_c, cap, pres, m.rho_lo, m.rho_hi);
    return model::normalize(raw);
}

spectral::Grid build_grid(const Scenario& sc) { return spectral::make_grid(sc.dim, sc.n, sc.L); }

Field build_initial(const Scenario& sc, const model::ModelParams&) {
    const auto g = build_grid(sc);
    Field base = shape(sc, g);
    Field lh = spectral::to_fourier(base);
    Field phih = lh;
    for (auto& v : lh.values) v *= sc.initial.amplitude;
    for (auto& v : phih.values) v *= sc.initial.phi_amplitude;
    phih.values[0] = 0.0;  // φ is stored zero-mean
    Field psi = propagator::apply_U(phih);
    spectral::axpy(psi, cplx(0.0, 1.0), lh);
    return psi;
}

std::uint64_t scenario_hash(const Scenario& sc) { return fnv1a(sc.resolved_json); }

ValidationReport validate(const Scenario& sc) {
    ValidationReport rep;
    const auto p = build_model(sc);  // StabilityViolation surfaces here
    {
        std::ostringstream os;
        os.precision(6);
        os << "normalization scales: time " << p.scales.time << ", space " << p.scales.space << ", potential "
           << p.scales.potential << "; alpha = " << p.alpha << ", g''(1) = " << p.gtilde_second;
        rep.notes.push_back(os.str());
    }
    const auto g = build_grid(sc);
    Field psi = build_initial(sc, p);
    Field l = spectral::to_physical(spectral::imag_part_fourier(psi));
    const double lmax = spectral::max_abs(l);
    const auto range = model::ell_range(p);
    if (!(1.0 + lmax < range.second && 1.0 - lmax > range.first)) {
        std::ostringstream os;
        os << "initial |l| reaches " << lmax << ", outside the admissible image [" << range.first - 1.0 << ", "
           << range.second - 1.0 << "] (vacuum proximity)";
        throw ConfigError("/initial/amplitude", os.str());
    }
    if (sc.integrator.amplitude_guard > 0.0 && lmax > sc.integrator.amplitude_guard) {
        std::ostringstream os;
        os << "initial |l| = " << lmax << " exceeds the amplitude guard " << sc.integrator.amplitude_guard;
        throw ConfigError("/initial/amplitude", os.str());
    }
    if (lmax > 0.0) {
        const double limit = g.L / (2.0 * propagator::group_velocity_bound(psi, 1e-3));
        const auto& ts = sc.integrator.snapshot_times;
        if (sc.integrator.dt > limit) {
            std::ostringstream os;
            os << "dt = " << sc.integrator.dt << " exceeds the wrap-around window " << limit;
            rep.warnings.push_back(os.str());
        }
        if (!ts.empty() && ts.back() > limit) {
            std::ostringstream os;
            os << "last snapshot t = " << ts.back() << " lies beyond the wrap-around window " << limit;
            rep.warnings.push_back(os.str());
        }
    }
    if ((sc.kind == ExperimentKind::normalform_check) && g.size() > normalform::kExactModeLimit) {
        std::ostringstream os;
        os << g.size() << " modes exceed the exact bilinear limit " << normalform::kExactModeLimit;
        throw ConfigError("/grid/n", os.str());
    }
    return rep;
}

}  // namespace ek::scenario

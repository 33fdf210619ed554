#include "ek/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

#include "ek/error.hpp"

namespace ek::spectral {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// FFTW planning is not thread safe; execution on new arrays is.
// FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, identical across runs.
class PlanCache {
public:
    fftw_plan get(int dim, int n, Direction dir) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_tuple(dim, n, dir == Direction::forward);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::array<int, 3> dims{n, n, n};
        std::size_t total = 1;
        for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
        auto* buf = fftw_alloc_complex(total);
        fftw_plan p = fftw_plan_dft(dim, dims.data(), buf, buf,
                                    dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        plans_.emplace(key, p);
        return p;
    }
    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

private:
    std::mutex mu_;
    std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

PlanCache& plans() {
    static PlanCache cache;
    return cache;
}

void require_fourier(const Field& f, const char* op) {
    if (f.space != Space::fourier)
        throw InvalidArgument(std::string(op) + ": field must be in Fourier space");
}

double bump_f(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

}  // namespace

std::size_t Grid::size() const {
    std::size_t s = 1;
    for (int d = 0; d < dim; ++d) s *= static_cast<std::size_t>(n);
    return s;
}

double Grid::dk() const { return two_pi / L; }

double Grid::cell_volume() const { return std::pow(dx(), dim); }

double Grid::volume() const { return std::pow(L, dim); }

std::array<int, 3> Grid::unflatten(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = dim - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(flat % n);
        flat /= n;
    }
    return idx;
}

std::size_t Grid::flatten(const std::array<int, 3>& idx) const {
    std::size_t flat = 0;
    for (int d = 0; d < dim; ++d) flat = flat * n + static_cast<std::size_t>(idx[d]);
    return flat;
}

Vec3 Grid::xi(std::size_t flat) const {
    auto idx = unflatten(flat);
    Vec3 k{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) k[d] = wavenumber(idx[d]);
    return k;
}

Vec3 Grid::x(std::size_t flat) const {
    auto idx = unflatten(flat);
    Vec3 p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) p[d] = dx() * idx[d];
    return p;
}

double Grid::xi_norm(std::size_t flat) const {
    auto k = xi(flat);
    return std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
}

std::size_t Grid::mirror(std::size_t flat) const {
    auto idx = unflatten(flat);
    for (int d = 0; d < dim; ++d) idx[d] = (n - idx[d]) % n;
    return flatten(idx);
}

Grid make_grid(int dim, int points_per_axis, double box_length) {
    if (dim < 1 || dim > 3) throw InvalidArgument("make_grid: dim must be 1, 2 or 3");
    if (points_per_axis < 8 || points_per_axis % 2 != 0)
        throw InvalidArgument("make_grid: points_per_axis must be even and >= 8, got " +
                              std::to_string(points_per_axis));
    if (!(box_length > 0.0) || !std::isfinite(box_length))
        throw InvalidArgument("make_grid: box_length must be positive");
    return Grid{dim, points_per_axis, box_length};
}

std::vector<double> xi_norms(const Grid& g) {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g.xi_norm(i);
    return out;
}

Field Field::zeros(const Grid& g, Space s, int comps) {
    Field f;
    f.grid = g;
    f.space = s;
    f.components = comps;
    f.values.assign(g.size() * comps, cplx(0.0, 0.0));
    return f;
}

Field Field::extract(int c) const {
    Field f = zeros(grid, space, 1);
    std::copy(component(c), component(c) + points(), f.values.begin());
    return f;
}

Field transform(const Field& f, Direction dir) {
    if ((dir == Direction::forward) != (f.space == Space::physical))
        throw InvalidArgument("transform: direction does not match space tag");
    Field out = f;
    fftw_plan p = plans().get(f.grid.dim, f.grid.n, dir);
    const double scale = 1.0 / std::sqrt(static_cast<double>(f.points()));
    for (int c = 0; c < f.components; ++c) {
        auto* data = reinterpret_cast<fftw_complex*>(out.component(c));
        fftw_execute_dft(p, data, data);
    }
    for (auto& v : out.values) v *= scale;
    out.space = dir == Direction::forward ? Space::fourier : Space::physical;
    return out;
}

Field to_fourier(const Field& f) {
    return f.space == Space::fourier ? f : transform(f, Direction::forward);
}

Field to_physical(const Field& f) {
    return f.space == Space::physical ? f : transform(f, Direction::inverse);
}

Field apply_multiplier(const Field& f, const Symbol& m) {
    require_fourier(f, "apply_multiplier");
    Field out = f;
    const std::size_t np = f.points();
    for (std::size_t i = 0; i < np; ++i) {
        cplx w = m(f.grid.xi(i));
        if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
            throw NonFinite("apply_multiplier: symbol not finite at lattice point " +
                            std::to_string(i));
        for (int c = 0; c < f.components; ++c) out.component(c)[i] *= w;
    }
    return out;
}

Field apply_radial(const Field& f, const RadialSymbol& m) {
    require_fourier(f, "apply_radial");
    Field out = f;
    const std::size_t np = f.points();
    for (std::size_t i = 0; i < np; ++i) {
        double w = m(f.grid.xi_norm(i));
        if (!std::isfinite(w))
            throw NonFinite("apply_radial: symbol not finite at lattice point " +
                            std::to_string(i));
        for (int c = 0; c < f.components; ++c) out.component(c)[i] *= w;
    }
    return out;
}

Field real_part_fourier(const Field& f) {
    require_fourier(f, "real_part_fourier");
    Field out = f;
    const std::size_t np = f.points();
    for (int c = 0; c < f.components; ++c) {
        const cplx* in = f.component(c);
        cplx* o = out.component(c);
        for (std::size_t i = 0; i < np; ++i) o[i] = 0.5 * (in[i] + std::conj(in[f.grid.mirror(i)]));
    }
    return out;
}

Field imag_part_fourier(const Field& f) {
    require_fourier(f, "imag_part_fourier");
    Field out = f;
    const std::size_t np = f.points();
    const cplx half_over_i(0.0, -0.5);
    for (int c = 0; c < f.components; ++c) {
        const cplx* in = f.component(c);
        cplx* o = out.component(c);
        for (std::size_t i = 0; i < np; ++i)
            o[i] = half_over_i * (in[i] - std::conj(in[f.grid.mirror(i)]));
    }
    return out;
}

Field derivative(const Field& f, int axis) {
    require_fourier(f, "derivative");
    return apply_multiplier(f, [axis](const Vec3& k) { return cplx(0.0, k[axis]); });
}

Field gradient(const Field& f) {
    require_fourier(f, "gradient");
    if (f.components != 1) throw InvalidArgument("gradient: scalar field expected");
    const int d = f.grid.dim;
    Field out = Field::zeros(f.grid, Space::fourier, d);
    const std::size_t np = f.points();
    for (std::size_t i = 0; i < np; ++i) {
        auto k = f.grid.xi(i);
        for (int a = 0; a < d; ++a) out.component(a)[i] = cplx(0.0, k[a]) * f.values[i];
    }
    return out;
}

Field laplacian(const Field& f) {
    return apply_radial(f, [](double r) { return -r * r; });
}

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = bump_f(t), b = bump_f(1.0 - t);
    return a / (a + b);
}

double dyadic_weight(double r_units, int j) {
    if (r_units <= 0.0) return j == 0 ? 1.0 : 0.0;
    double x = std::log2(r_units);
    return smooth_step(x - j + 1.0) - smooth_step(x - j);
}

double block_cutoff(double r, double a) {
    if (r <= 0.0) return 0.0;
    double x = std::log2(r / a);
    return smooth_step(x + 1.0) - smooth_step(x);
}

int dyadic_max(const Grid& g) {
    double rmax = 0.5 * g.n * std::sqrt(static_cast<double>(g.dim));
    return static_cast<int>(std::ceil(std::log2(rmax))) + 1;
}

Field dyadic_project(const Field& f, int j) {
    require_fourier(f, "dyadic_project");
    const double dk = f.grid.dk();
    return apply_radial(f, [j, dk](double r) { return dyadic_weight(r / dk, j); });
}

Field dealias(const Field& f, double fraction) {
    require_fourier(f, "dealias");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("dealias: fraction must be in (0,1]");
    if (fraction == 1.0) return f;
    Field out = f;
    const double cut = fraction * f.grid.k_max();
    const std::size_t np = f.points();
    for (std::size_t i = 0; i < np; ++i) {
        auto k = f.grid.xi(i);
        bool drop = false;
        for (int d = 0; d < f.grid.dim; ++d) drop = drop || std::abs(k[d]) > cut;
        if (drop)
            for (int c = 0; c < f.components; ++c) out.component(c)[i] = 0.0;
    }
    return out;
}

Field product(const Field& a, const Field& b, double fraction) {
    Field pa = to_physical(dealias(a, fraction));
    Field pb = to_physical(dealias(b, fraction));
    for (std::size_t i = 0; i < pa.values.size(); ++i) pa.values[i] *= pb.values[i];
    return dealias(to_fourier(pa), fraction);
}

namespace {

double lp_physical(const Field& phys, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (auto v : phys.values) m = std::max(m, std::abs(v));
        return m;
    }
    if (phys.components == 1) {
        double s = 0.0;
        for (auto v : phys.values) s += std::pow(std::abs(v), p);
        return std::pow(s * phys.grid.cell_volume(), 1.0 / p);
    }
    // vector field: pointwise Euclidean magnitude
    double s = 0.0;
    const std::size_t np = phys.points();
    for (std::size_t i = 0; i < np; ++i) {
        double m2 = 0.0;
        for (int c = 0; c < phys.components; ++c) m2 += std::norm(phys.component(c)[i]);
        s += std::pow(m2, 0.5 * p);
    }
    return std::pow(s * phys.grid.cell_volume(), 1.0 / p);
}

void multi_indices(int dim, int k, std::vector<std::array<int, 3>>& out) {
    for (int a = 0; a <= k; ++a)
        for (int b = 0; b <= (dim > 1 ? k - a : 0); ++b)
            for (int c = 0; c <= (dim > 2 ? k - a - b : 0); ++c) out.push_back({a, b, c});
}

}  // namespace

double norm(const Field& f, const NormKind& kind) {
    double result = 0.0;
    switch (kind.type) {
        case NormKind::Type::Lp: {
            if (!(kind.p >= 1.0)) throw InvalidArgument("norm: p must be >= 1");
            result = lp_physical(to_physical(f), kind.p);
            break;
        }
        case NormKind::Type::Hs:
        case NormKind::Type::Hdot: {
            Field fh = to_fourier(f);
            const bool homogeneous = kind.type == NormKind::Type::Hdot;
            double s = 0.0;
            const std::size_t np = fh.points();
            for (std::size_t i = 0; i < np; ++i) {
                double r = fh.grid.xi_norm(i);
                if (homogeneous && r == 0.0) continue;
                double w = homogeneous ? std::pow(r, 2.0 * kind.s) : std::pow(1.0 + r * r, kind.s);
                for (int c = 0; c < fh.components; ++c) s += w * std::norm(fh.component(c)[i]);
            }
            result = std::sqrt(s * fh.grid.cell_volume());
            break;
        }
        case NormKind::Type::Wkp: {
            if (kind.k < 0) throw InvalidArgument("norm: k must be >= 0");
            Field fh = to_fourier(f);
            std::vector<std::array<int, 3>> betas;
            multi_indices(fh.grid.dim, kind.k, betas);
            for (const auto& beta : betas) {
                Field d = apply_multiplier(fh, [&beta](const Vec3& k) {
                    cplx w(1.0, 0.0);
                    for (int a = 0; a < 3; ++a)
                        for (int m = 0; m < beta[a]; ++m) w *= cplx(0.0, k[a]);
                    return w;
                });
                result += lp_physical(to_physical(d), kind.p);
            }
            break;
        }
    }
    if (!std::isfinite(result)) throw NonFinite("norm: non-finite result");
    return result;
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (auto v : f.values) m = std::max(m, std::abs(v));
    return m;
}

Field add(const Field& a, const Field& b, double scale_b) {
    if (a.values.size() != b.values.size() || a.space != b.space)
        throw InvalidArgument("add: incompatible fields");
    Field out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += scale_b * b.values[i];
    return out;
}

void axpy(Field& y, cplx a, const Field& x) {
    if (y.values.size() != x.values.size()) throw InvalidArgument("axpy: size mismatch");
    for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

}  // namespace ek::spectral

#include "wdsub/mollify.hpp"

#include <cmath>
#include <numbers>

#include "wdsub/detail/bellman_terms.hpp"
#include "wdsub/errors.hpp"

namespace wdsub {

namespace {

double bump(double u2) { return u2 < 1.0 ? std::exp(-1.0 / (1.0 - u2)) : 0.0; }

struct KernelH4 {
    const MollifierKernel* kernel;

    template <class T>
    T operator()(const T& X2, const T& Y2, const T& r, const T& s, const T& K) const {
        using std::sqrt;
        const T nx = sqrt(X2);
        const T ny = sqrt(Y2);
        T acc = 0.0;
        for (std::size_t k = 0; k < kernel->weights.size(); ++k) {
            const auto& o = kernel->offsets[k];
            const T ax = nx - o[0];
            const T ay = ny - o[1];
            acc += kernel->weights[k] * detail::h4_value(ax * ax, ay * ay, r - o[2], s - o[3], K - o[4]);
        }
        return acc;
    }
};

}  // namespace

MollifierKernel MollifierKernel::build(double ell, int m) {
    if (!(ell > 0.0) || !std::isfinite(ell)) throw ConfigError("mollifier radius must be positive");
    if (m < 4) throw ConfigError("mollifier needs at least 4 lattice points per radius");
    MollifierKernel k;
    k.ell = ell;
    k.m = m;
    k.spacing = ell / m;
    double total = 0.0;
    const int m2 = m * m;
    for (int a = -m; a <= m; ++a) {
        for (int b = -m; b <= m; ++b) {
            for (int c = -m; c <= m; ++c) {
                for (int d = -m; d <= m; ++d) {
                    for (int e = -m; e <= m; ++e) {
                        const int n2 = a * a + b * b + c * c + d * d + e * e;
                        if (n2 >= m2) continue;
                        const double w = bump(static_cast<double>(n2) / m2);
                        k.offsets.push_back({a * k.spacing, b * k.spacing, c * k.spacing, d * k.spacing, e * k.spacing});
                        k.weights.push_back(w);
                        total += w;
                    }
                }
            }
        }
    }
    for (double& w : k.weights) w /= total;
    k.riemann_mass = total / std::pow(static_cast<double>(m), 5);
    return k;
}

double bump_mass_5d() {
    // Surface area of S⁴ is 8π²/3; integrate ρ⁴·bump(ρ²) over [0, 1] by Simpson.
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double rho = static_cast<double>(i) / n;
        const double f = std::pow(rho, 4) * bump(rho * rho);
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f;
    }
    return 8.0 * std::numbers::pi * std::numbers::pi / 3.0 * acc / (3.0 * n);
}

double mollified_H4(const MollifierKernel& kernel, double norm_x, double norm_y, double r, double s, double K) {
    return KernelH4{&kernel}(norm_x * norm_x, norm_y * norm_y, r, s, K);
}

MollifiedBellman::MollifiedBellman(const BellmanConfig& cfg, int m)
    : cfg_(cfg), kernel_(MollifierKernel::build(cfg.ell, m)) {}

double MollifiedBellman::value(const StatePoint& v) const {
    double X2 = 0.0, Y2 = 0.0;
    for (double c : v.x) X2 += c * c;
    for (double c : v.y) Y2 += c * c;
    return detail::bellman_total(X2, Y2, v.r, v.s, cfg_, KernelH4{&kernel_});
}

std::vector<double> MollifiedBellman::gradient(const StatePoint& v) const {
    const std::vector<double> base = v.flatten();
    std::vector<HyperDual> flat(base.begin(), base.end());
    std::vector<double> g(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        flat[i].d1 = 1.0;
        g[i] = detail::bellman_flat<HyperDual>(flat, v.dim(), cfg_, KernelH4{&kernel_}).d1;
        flat[i].d1 = 0.0;
    }
    return g;
}

double MollifiedBellman::hessian_form(const StatePoint& v, const Perturbation& dv) const {
    const std::vector<double> base = v.flatten();
    const std::vector<double> dir = dv.flatten();
    if (dir.size() != base.size()) throw InvalidInput("direction dimension does not match the point");
    std::vector<HyperDual> flat(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) flat[i] = HyperDual(base[i], dir[i], dir[i], 0.0);
    return detail::bellman_flat<HyperDual>(flat, v.dim(), cfg_, KernelH4{&kernel_}).d12;
}

std::array<double, 5> GridSpec::spacing() const {
    std::array<double, 5> h{};
    for (int i = 0; i < 5; ++i) h[i] = points[i] > 1 ? (upper[i] - lower[i]) / (points[i] - 1) : 0.0;
    return h;
}

std::size_t GridSpec::size() const {
    std::size_t n = 1;
    for (int p : points) n *= static_cast<std::size_t>(p);
    return n;
}

std::size_t MollifiedGrid::flat_index(const std::array<int, 5>& index) const {
    std::size_t idx = 0;
    for (int i = 0; i < 5; ++i) {
        if (index[i] < 0 || index[i] >= spec_.points[i]) throw InvalidInput("grid index out of range");
        idx = idx * static_cast<std::size_t>(spec_.points[i]) + static_cast<std::size_t>(index[i]);
    }
    return idx;
}

std::array<double, 5> MollifiedGrid::coordinates(const std::array<int, 5>& index) const {
    const auto h = spec_.spacing();
    std::array<double, 5> p{};
    for (int i = 0; i < 5; ++i) p[i] = spec_.lower[i] + index[i] * h[i];
    return p;
}

double MollifiedGrid::at(const std::array<int, 5>& index) const { return values_[flat_index(index)]; }

double MollifiedGrid::second_difference(const std::array<int, 5>& index, const std::array<int, 5>& e) const {
    std::array<int, 5> plus = index, minus = index;
    const auto h = spec_.spacing();
    double len2 = 0.0;
    for (int i = 0; i < 5; ++i) {
        plus[i] += e[i];
        minus[i] -= e[i];
        len2 += (e[i] * h[i]) * (e[i] * h[i]);
    }
    if (len2 == 0.0) throw InvalidInput("zero lattice direction");
    return (at(plus) - 2.0 * at(index) + at(minus)) / len2;
}

MollifiedGrid mollify_H4(double ell, const GridSpec& grid, int m) {
    for (int i = 0; i < 5; ++i) {
        if (grid.points[i] < 1) throw ConfigError("grid needs at least one point per axis");
        if (!(grid.upper[i] >= grid.lower[i])) throw ConfigError("grid upper corner below lower corner");
    }
    const auto h = grid.spacing();
    for (int i = 0; i < 5; ++i) {
        if (h[i] > ell / 4.0) throw ConfigError("grid spacing exceeds ell/4");
    }
    const auto& lo = grid.lower;
    const auto& hi = grid.upper;
    for (int i = 0; i < 5; ++i) {
        if (lo[i] - ell < 0.0) throw ConfigError("kernel support leaves the nonnegative orthant");
    }
    if ((lo[2] - ell) * (lo[3] - ell) <= (hi[4] + ell) * (hi[4] + ell)) {
        throw ConfigError("kernel support reaches rs ≤ K²");
    }
    const MollifierKernel kernel = MollifierKernel::build(ell, m);
    std::vector<double> values(grid.size());
    std::array<int, 5> idx{};
    for (std::size_t n = 0; n < values.size(); ++n) {
        std::size_t rem = n;
        for (int i = 4; i >= 0; --i) {
            idx[i] = static_cast<int>(rem % static_cast<std::size_t>(grid.points[i]));
            rem /= static_cast<std::size_t>(grid.points[i]);
        }
        values[n] = mollified_H4(kernel, lo[0] + idx[0] * h[0], lo[1] + idx[1] * h[1], lo[2] + idx[2] * h[2],
                                 lo[3] + idx[3] * h[3], lo[4] + idx[4] * h[4]);
    }
    return MollifiedGrid(grid, std::move(values));
}

}  // namespace wdsub

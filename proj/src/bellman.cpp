#include "wdsub/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "wdsub/detail/bellman_terms.hpp"
#include "wdsub/errors.hpp"

namespace wdsub {

namespace {

double squared_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double c : v) acc += c * c;
    return acc;
}

void require_finite(const StatePoint& v) {
    if (v.x.size() != v.y.size() || v.x.empty()) {
        throw InvalidInput("x and y must be nonempty and of equal length");
    }
    auto finite = [](double c) { return std::isfinite(c); };
    if (!std::all_of(v.x.begin(), v.x.end(), finite) || !std::all_of(v.y.begin(), v.y.end(), finite) ||
        !std::isfinite(v.r) || !std::isfinite(v.s)) {
        throw InvalidInput("non-finite coordinate in state point");
    }
    if (!(v.r > 0.0) || !(v.s > 0.0)) throw DomainError("r and s must be positive");
}

void require_product_range(double r, double s, double Q) {
    const double t = r * s;
    if (!(t >= 1.0) || !(t <= Q)) {
        std::ostringstream os;
        os << "rs = " << t << " outside [1, " << Q << "]";
        throw DomainError(os.str());
    }
}

// Gradient of sq/D with D = 2·own − 1/(other·(P + 1)), P = P(own·other).
struct LegGradient {
    double d_sq;
    double d_own;
    double d_other;
};

LegGradient leg_gradient(double sq, double own, double other, double P, double P_prime) {
    const double p1 = P + 1.0;
    const double D = 2.0 * own - 1.0 / (other * p1);
    const double dD_own = 2.0 + P_prime / (p1 * p1);
    const double dD_other = 1.0 / (other * other * p1) + own * P_prime / (other * p1 * p1);
    const double inv = 1.0 / D;
    return {inv, -sq * dD_own * inv * inv, -sq * dD_other * inv * inv};
}

std::vector<HyperDual> seeded(const std::vector<double>& flat) {
    std::vector<HyperDual> out(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) out[i] = HyperDual(flat[i]);
    return out;
}

double hyperdual_entry(std::vector<HyperDual>& flat, std::size_t dim, const BellmanConfig& cfg, std::size_t i,
                       std::size_t j) {
    flat[i].d1 = 1.0;
    flat[j].d2 = 1.0;
    const HyperDual b = detail::bellman_flat<HyperDual>(flat, dim, cfg, detail::PlainH4{});
    flat[i].d1 = 0.0;
    flat[j].d2 = 0.0;
    return b.d12;
}

Eigen::MatrixXd fd_hessian(const StatePoint& v, const BellmanConfig& cfg) {
    const std::size_t d = v.dim();
    const std::vector<double> base = v.flatten();
    const std::size_t n = base.size();
    const double xy_scale = std::max({std::sqrt(squared_norm(v.x)), std::sqrt(squared_norm(v.y)), 1e-300});
    Eigen::MatrixXd H(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double scale = xy_scale;
        if (j == 2 * d) scale = v.r;
        if (j == 2 * d + 1) scale = v.s;
        const double h = 1e-5 * scale;
        std::vector<double> plus = base;
        std::vector<double> minus = base;
        plus[j] += h;
        minus[j] -= h;
        const auto gp = bellman_gradient(StatePoint::unflatten(plus), cfg);
        const auto gm = bellman_gradient(StatePoint::unflatten(minus), cfg);
        for (std::size_t i = 0; i < n; ++i) H(i, j) = (gp[i] - gm[i]) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

}  // namespace

Coefficients default_coefficients() {
    static const Coefficients c = determine_coefficients(1.0);
    return c;
}

void BellmanConfig::validate() const {
    if (!(Q >= 1.0) || !std::isfinite(Q)) throw ConfigError("Q must be a finite number ≥ 1");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    if (!(ell > 0.0 && ell <= eps / 2.0)) throw ConfigError("ell must lie in (0, eps/2]");
    if (dim < 1) throw ConfigError("dim must be at least 1");
    if (!(coeffs.c1 > 0.0 && coeffs.c2 > 0.0 && coeffs.c3 > 0.0 && coeffs.c7 > 0.0)) {
        throw ConfigError("coefficients must be positive");
    }
    const auto form = reduced_form_coefficients(coeffs);
    if (*std::min_element(form.begin(), form.end()) < 0.0) {
        throw ConfigError("coefficients fail the reduced Hessian-bound check");
    }
}

double BellmanConfig::size_constant() const { return coeffs.c1 + coeffs.c2 + coeffs.c3 + 3.0 * coeffs.c7; }

std::vector<double> StatePoint::flatten() const {
    if (x.size() != y.size()) throw InvalidInput("x and y must have equal length");
    std::vector<double> out;
    out.reserve(2 * x.size() + 2);
    out.insert(out.end(), x.begin(), x.end());
    out.insert(out.end(), y.begin(), y.end());
    out.push_back(r);
    out.push_back(s);
    return out;
}

StatePoint StatePoint::unflatten(std::span<const double> flat) {
    if (flat.size() < 4 || flat.size() % 2 != 0) throw InvalidInput("flattened state must have length 2d + 2");
    const std::size_t d = (flat.size() - 2) / 2;
    StatePoint v;
    v.x.assign(flat.begin(), flat.begin() + d);
    v.y.assign(flat.begin() + d, flat.begin() + 2 * d);
    v.r = flat[2 * d];
    v.s = flat[2 * d + 1];
    return v;
}

std::vector<double> Perturbation::flatten() const {
    if (dx.size() != dy.size()) throw InvalidInput("dx and dy must have equal length");
    std::vector<double> out;
    out.reserve(2 * dx.size() + 2);
    out.insert(out.end(), dx.begin(), dx.end());
    out.insert(out.end(), dy.begin(), dy.end());
    out.push_back(dr);
    out.push_back(ds);
    return out;
}

Perturbation Perturbation::unflatten(std::span<const double> flat) {
    if (flat.size() < 4 || flat.size() % 2 != 0) throw InvalidInput("flattened direction must have length 2d + 2");
    const std::size_t d = (flat.size() - 2) / 2;
    Perturbation p;
    p.dx.assign(flat.begin(), flat.begin() + d);
    p.dy.assign(flat.begin() + d, flat.begin() + 2 * d);
    p.dr = flat[2 * d];
    p.ds = flat[2 * d + 1];
    return p;
}

std::string to_string(Region region) {
    switch (region) {
        case Region::R1: return "R1";
        case Region::R2: return "R2";
        case Region::R3: return "R3";
        case Region::Cut: return "CUT";
    }
    return "?";
}

DomainFlags domain_check(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    DomainFlags f;
    const double t = v.r * v.s;
    f.in_DQ = t >= 1.0 && t <= cfg.Q;
    const double lo = cfg.eps;
    const double hi = 1.0 / cfg.eps;
    f.in_DQ_eps = f.in_DQ && v.r >= lo && v.r <= hi && v.s >= lo && v.s <= hi;
    const double nx = std::sqrt(squared_norm(v.x));
    const double ny = std::sqrt(squared_norm(v.y));
    f.in_DQ_eps_ell = f.in_DQ_eps && nx >= cfg.ell && ny >= cfg.ell;
    return f;
}

double eval_B1(const StatePoint& v) {
    require_finite(v);
    return squared_norm(v.x) / v.r + squared_norm(v.y) / v.s;
}

double eval_K(double r, double s, double Q) {
    require_product_range(r, s, Q);
    return detail::profile_K(r * s, Q);
}

double eval_N(double r, double s, double Q) {
    require_product_range(r, s, Q);
    return detail::profile_N(r * s, Q);
}

double eval_M(double r, double s, double Q) { return r - 1.0 / (s * (eval_N(r, s, Q) + 1.0)); }

double eval_B2(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    const double N = eval_N(v.r, v.s, cfg.Q);
    return detail::leg_term(squared_norm(v.x), v.r, v.s, N) + squared_norm(v.y) / v.s;
}

double eval_B3(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    const double N = eval_N(v.r, v.s, cfg.Q);
    return squared_norm(v.x) / v.r + detail::leg_term(squared_norm(v.y), v.s, v.r, N);
}

double eval_B4(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    const double K = eval_K(v.r, v.s, cfg.Q);
    return eval_H4(std::sqrt(squared_norm(v.x)), std::sqrt(squared_norm(v.y)), v.r, v.s, K);
}

double eval_B5(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    const double K = eval_K(v.r, v.s, cfg.Q);
    return detail::leg_term(squared_norm(v.x), v.r, v.s, K) + squared_norm(v.y) / v.s;
}

double eval_B6(const StatePoint& v, const BellmanConfig& cfg) {
    require_finite(v);
    const double K = eval_K(v.r, v.s, cfg.Q);
    return squared_norm(v.x) / v.r + detail::leg_term(squared_norm(v.y), v.s, v.r, K);
}

double eval_B7(const StatePoint& v, const BellmanConfig& cfg) {
    return eval_B4(v, cfg) + eval_B5(v, cfg) + eval_B6(v, cfg);
}

std::array<double, 2> cut_quantities(double norm_x, double norm_y, double r, double s, double K) {
    return {norm_y * r - norm_x * K, norm_x * s - norm_y * K};
}

Region classify_region(double norm_x, double norm_y, double r, double s, double K) {
    const auto [a, b] = cut_quantities(norm_x, norm_y, r, s, K);
    const double tol = kCutTolerance * std::max({norm_x, norm_y, 1.0});
    if (std::abs(a) < tol || std::abs(b) < tol) return Region::Cut;
    if (a > 0.0 && b > 0.0) return Region::R1;
    if (a > 0.0) return Region::R2;
    return Region::R3;
}

double eval_H4(double norm_x, double norm_y, double r, double s, double K) {
    if (!(norm_x >= 0.0) || !(norm_y >= 0.0) || !(r > 0.0) || !(s > 0.0) || !(K >= 0.0)) {
        throw DomainError("H4 requires nonnegative norms and K, positive r and s");
    }
    if (K * K >= r * s) throw DomainError("H4 requires K² < rs");
    return detail::h4_value(norm_x * norm_x, norm_y * norm_y, r, s, K);
}

H4Gradient grad_H4(double norm_x, double norm_y, double r, double s, double K) {
    if (K * K >= r * s) throw DomainError("H4 requires K² < rs");
    const auto [a, b] = cut_quantities(norm_x, norm_y, r, s, K);
    const double X2 = norm_x * norm_x;
    const double Y2 = norm_y * norm_y;
    H4Gradient g;
    if (a > 0.0 && b > 0.0) {
        const double den = r * s - K * K;
        const double num = X2 * s - 2.0 * norm_x * norm_y * K + Y2 * r;
        g.d_norm_x = 2.0 * b / den;
        g.d_norm_y = 2.0 * a / den;
        g.dr = -b * b / (den * den);
        g.ds = -a * a / (den * den);
        g.dK = (-2.0 * norm_x * norm_y * den + 2.0 * K * num) / (den * den);
    } else if (a > 0.0) {
        g.d_norm_y = 2.0 * norm_y / s;
        g.ds = -Y2 / (s * s);
    } else {
        g.d_norm_x = 2.0 * norm_x / r;
        g.dr = -X2 / (r * r);
    }
    return g;
}

double EvalResult::hessian_form(const Perturbation& dv) const {
    const std::vector<double> d = dv.flatten();
    if (static_cast<Eigen::Index>(d.size()) != hessian.rows()) {
        throw InvalidInput("direction dimension does not match the Hessian");
    }
    const Eigen::Map<const Eigen::VectorXd> u(d.data(), static_cast<Eigen::Index>(d.size()));
    return u.dot(hessian * u);
}

double bellman_value(const StatePoint& v, const BellmanConfig& cfg) {
    return detail::bellman_total(squared_norm(v.x), squared_norm(v.y), v.r, v.s, cfg, detail::PlainH4{});
}

std::vector<double> bellman_gradient(const StatePoint& v, const BellmanConfig& cfg) {
    const std::size_t d = v.dim();
    const double X2 = squared_norm(v.x);
    const double Y2 = squared_norm(v.y);
    const double nx = std::sqrt(X2);
    const double ny = std::sqrt(Y2);
    const double r = v.r;
    const double s = v.s;
    const double t = r * s;
    const double Q = cfg.Q;
    const double K = detail::profile_K(t, Q);
    const double N = detail::profile_N(t, Q);
    const double Kp = detail::profile_K_prime(t, Q);
    const double Np = detail::profile_N_prime(t, Q);
    const auto& c = cfg.coeffs;

    // Accumulate ∂/∂X2, ∂/∂Y2, ∂r, ∂s; B4 contributes through |x|, |y| directly.
    double gX2 = 0.0;
    double gY2 = 0.0;
    double gr = 0.0;
    double gs = 0.0;

    auto add_xr = [&](double w) {
        gX2 += w / r;
        gr -= w * X2 / (r * r);
    };
    auto add_ys = [&](double w) {
        gY2 += w / s;
        gs -= w * Y2 / (s * s);
    };
    auto add_leg_x = [&](double w, double P, double Pp) {
        const LegGradient lg = leg_gradient(X2, r, s, P, Pp);
        gX2 += w * lg.d_sq;
        gr += w * lg.d_own;
        gs += w * lg.d_other;
    };
    auto add_leg_y = [&](double w, double P, double Pp) {
        const LegGradient lg = leg_gradient(Y2, s, r, P, Pp);
        gY2 += w * lg.d_sq;
        gs += w * lg.d_own;
        gr += w * lg.d_other;
    };

    add_xr(c.c1);
    add_ys(c.c1);
    add_leg_x(c.c2, N, Np);
    add_ys(c.c2);
    add_xr(c.c3);
    add_leg_y(c.c3, N, Np);
    add_leg_x(c.c7, K, Kp);
    add_ys(c.c7);
    add_xr(c.c7);
    add_leg_y(c.c7, K, Kp);

    const H4Gradient h = grad_H4(nx, ny, r, s, K);
    const double hx = nx > 0.0 ? c.c7 * h.d_norm_x / nx : 0.0;
    const double hy = ny > 0.0 ? c.c7 * h.d_norm_y / ny : 0.0;
    gr += c.c7 * (h.dr + h.dK * Kp * s);
    gs += c.c7 * (h.ds + h.dK * Kp * r);

    std::vector<double> g(2 * d + 2);
    for (std::size_t i = 0; i < d; ++i) {
        g[i] = 2.0 * gX2 * v.x[i] + hx * v.x[i];
        g[d + i] = 2.0 * gY2 * v.y[i] + hy * v.y[i];
    }
    g[2 * d] = gr;
    g[2 * d + 1] = gs;
    return g;
}

Eigen::MatrixXd bellman_hessian(const StatePoint& v, const BellmanConfig& cfg) {
    const std::size_t d = v.dim();
    auto flat = seeded(v.flatten());
    const std::size_t n = flat.size();
    Eigen::MatrixXd H(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            H(i, j) = hyperdual_entry(flat, d, cfg, i, j);
            H(j, i) = H(i, j);
        }
    }
    return H;
}

double bellman_hessian_form(const StatePoint& v, const Perturbation& dv, const BellmanConfig& cfg) {
    const std::vector<double> dir = dv.flatten();
    auto flat = seeded(v.flatten());
    if (dir.size() != flat.size()) throw InvalidInput("direction dimension does not match the point");
    for (std::size_t i = 0; i < flat.size(); ++i) {
        flat[i].d1 = dir[i];
        flat[i].d2 = dir[i];
    }
    return detail::bellman_flat<HyperDual>(flat, v.dim(), cfg, detail::PlainH4{}).d12;
}

Eigen::MatrixXd bellman_hessian_xx(const StatePoint& v, const BellmanConfig& cfg) {
    const std::size_t d = v.dim();
    auto flat = seeded(v.flatten());
    Eigen::MatrixXd H(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            H(i, j) = hyperdual_entry(flat, d, cfg, i, j);
            H(j, i) = H(i, j);
        }
    }
    return H;
}

Region region_of(const StatePoint& v, const BellmanConfig& cfg) {
    const double K = detail::profile_K(v.r * v.s, cfg.Q);
    return classify_region(std::sqrt(squared_norm(v.x)), std::sqrt(squared_norm(v.y)), v.r, v.s, K);
}

EvalResult eval_B(const StatePoint& v, const BellmanConfig& cfg, const EvalOptions& options) {
    require_finite(v);
    const double slack = options.domain_slack;
    const double t = v.r * v.s;
    if (!(t >= 1.0 - slack) || !(t <= cfg.Q * (1.0 + slack))) {
        std::ostringstream os;
        os << "rs = " << t << " outside [1, " << cfg.Q << "]";
        throw DomainError(os.str());
    }
    const double lo = cfg.eps * (1.0 - slack);
    const double hi = (1.0 + slack) / cfg.eps;
    if (v.r < lo || v.r > hi || v.s < lo || v.s > hi) throw DomainError("r or s outside [eps, 1/eps]");

    EvalResult out;
    out.value = bellman_value(v, cfg);
    out.gradient = bellman_gradient(v, cfg);
    out.region = region_of(v, cfg);
    if (options.with_hessian) {
        if (out.region == Region::Cut) {
            out.hessian = fd_hessian(v, cfg);
            out.degraded = true;
        } else {
            out.hessian = bellman_hessian(v, cfg);
        }
    }
    return out;
}

std::array<double, 4> reduced_form_coefficients(const Coefficients& c) {
    const double h = std::numbers::sqrt3 / 2.0;
    return {4.0 * c.c1 - 2.0, -4.0 * c.c1 + h * c.c3, -4.0 * c.c1 + h * c.c2,
            4.0 * c.c1 - h * (c.c2 + c.c3) + c.c7 / 256.0};
}

double reduced_margin(const Coefficients& c, double p, double q, double rho, double sigma) {
    const double h = std::numbers::sqrt3 / 2.0;
    return 4.0 * c.c1 * (p - rho) * (q - sigma) + h * c.c2 * rho * (q - sigma) + h * c.c3 * sigma * (p - rho) +
           c.c7 / 256.0 * rho * sigma - 2.0 * p * q;
}

CoefficientCheck check_coefficients(const Coefficients& c, int grid) {
    if (grid < 1) throw ConfigError("coefficient grid must be positive");
    CoefficientCheck out;
    out.min_margin = std::numeric_limits<double>::infinity();
    const double step = std::numbers::pi / 2.0 / grid;
    for (int i = 0; i <= grid; ++i) {
        const double t1 = i * step;
        for (int j = 0; j <= grid; ++j) {
            const double t2 = j * step;
            for (int k = 0; k <= grid; ++k) {
                const double t3 = k * step;
                const std::array<double, 4> dir{std::cos(t1), std::sin(t1) * std::cos(t2),
                                                std::sin(t1) * std::sin(t2) * std::cos(t3),
                                                std::sin(t1) * std::sin(t2) * std::sin(t3)};
                const double m = reduced_margin(c, dir[0], dir[1], dir[2], dir[3]);
                ++out.directions_checked;
                if (m < out.min_margin) {
                    out.min_margin = m;
                    out.worst_direction = dir;
                }
            }
        }
    }
    // Roundoff at the coordinate axes produces margins of order 1e-16·|c|.
    const double scale = std::max({c.c1, c.c2, c.c3, c.c7 / 256.0, 1.0});
    out.feasible = out.min_margin >= -1e-12 * scale;
    return out;
}

Coefficients determine_coefficients(double Q, const std::optional<Coefficients>& draft, double headroom) {
    if (!(Q >= 1.0) || !std::isfinite(Q)) throw ConfigError("Q must be a finite number ≥ 1");
    if (!(headroom > 0.0)) throw ConfigError("headroom must be positive");
    if (draft) {
        const CoefficientCheck check = check_coefficients(*draft);
        if (!check.feasible) {
            const auto& w = check.worst_direction;
            std::ostringstream os;
            os << "coefficients violate the reduced Hessian bound at (p, q, rho, sigma) = (" << w[0] << ", " << w[1]
               << ", " << w[2] << ", " << w[3] << "), margin " << check.min_margin;
            throw InfeasibleCoefficients(os.str(), w);
        }
        return *draft;
    }
    // The reduced problem does not involve Q, so the same vector serves every Q.
    const double grow = 1.0 + headroom;
    const double h = std::numbers::sqrt3 / 2.0;
    Coefficients c;
    c.c1 = grow * 0.5;
    c.c2 = grow * 4.0 * c.c1 / h;
    c.c3 = c.c2;
    c.c7 = grow * 256.0 * (h * (c.c2 + c.c3) - 4.0 * c.c1);
    return c;
}

}  // namespace wdsub

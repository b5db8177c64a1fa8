#include "wdsub/certify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "wdsub/detail/bellman_terms.hpp"
#include "wdsub/detail/format.hpp"
#include "wdsub/errors.hpp"
#include "wdsub/parallel.hpp"

namespace wdsub {

namespace {

using detail::fmt;
using detail::fmt_vec;

enum Stream : std::uint64_t { kPoints = 1, kChecks = 2, kCuts = 3, kTau = 4 };

constexpr double kDomainSlack = 1e-12;

double sq_norm(const std::vector<double>& v) {
    double a = 0.0;
    for (double c : v) a += c * c;
    return a;
}

double norm(const std::vector<double>& v) { return std::sqrt(sq_norm(v)); }

double max_rs(const BellmanConfig& cfg) { return std::min(cfg.Q, 1.0 / (cfg.eps * cfg.eps)); }

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> G(0.0, 1.0);
    std::vector<double> v(n);
    double n2 = 0.0;
    while (n2 == 0.0) {
        n2 = 0.0;
        for (double& c : v) {
            c = G(rng);
            n2 += c * c;
        }
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& c : v) c *= inv;
    return v;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    return std::exp(std::log(lo) + U(rng) * (std::log(hi) - std::log(lo)));
}

// (r, s) with log(rs) uniform on [0, log tmax] and log r uniform on the ε-box slice.
std::pair<double, double> sample_rs(std::mt19937_64& rng, const BellmanConfig& cfg) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double tmax = max_rs(cfg);
    const double lo = cfg.eps, hi = 1.0 / cfg.eps;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double t = std::exp(U(rng) * std::log(tmax));
        const double rlo = std::max(lo, t * lo);
        const double rhi = std::min(hi, t * hi);
        const double r = rlo < rhi ? log_uniform(rng, rlo, rhi) : rlo;
        double s = t / r;
        // Nudge s so that the product survives rounding.
        for (int k = 0; k < 4 && r * s < 1.0; ++k) s = std::nextafter(s, hi + 1.0);
        for (int k = 0; k < 4 && r * s > tmax; ++k) s = std::nextafter(s, 0.0);
        if (r * s >= 1.0 && r * s <= tmax && s >= lo && s <= hi && r >= lo && r <= hi) return {r, s};
    }
    throw ConfigError("could not draw (r, s) from the sampling slice");
}

std::vector<double> scaled(std::vector<double> dir, double magnitude) {
    for (double& c : dir) c *= magnitude;
    return dir;
}

StatePoint sample_point(std::mt19937_64& rng, const BellmanConfig& cfg) {
    StatePoint v;
    std::tie(v.r, v.s) = sample_rs(rng, cfg);
    const auto d = static_cast<std::size_t>(cfg.dim);
    v.x = scaled(random_unit(rng, d), log_uniform(rng, cfg.ell, 1.0 / cfg.eps));
    v.y = scaled(random_unit(rng, d), log_uniform(rng, cfg.ell, 1.0 / cfg.eps));
    return v;
}

double spectral_norm(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

// 8 structured unit directions followed by `random` uniform ones.
std::vector<Eigen::VectorXd> test_directions(const StatePoint& v, std::mt19937_64& rng, std::size_t random) {
    const std::size_t d = v.dim();
    const std::size_t n = 2 * d + 2;
    const double nx = norm(v.x), ny = norm(v.y);
    Eigen::VectorXd xh = Eigen::VectorXd::Zero(n), yh = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd er = Eigen::VectorXd::Zero(n), es = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < d; ++i) {
        xh(i) = nx > 0 ? v.x[i] / nx : (i == 0 ? 1.0 : 0.0);
        yh(d + i) = ny > 0 ? v.y[i] / ny : (i == 0 ? 1.0 : 0.0);
    }
    er(2 * d) = 1.0;
    es(2 * d + 1) = 1.0;
    const double h = std::numbers::sqrt2 / 2.0;
    std::vector<Eigen::VectorXd> out{xh, yh, er, es, h * (xh + yh), h * (xh - yh), h * (er + es), h * (er - es)};
    for (std::size_t k = 0; k < random; ++k) {
        const auto u = random_unit(rng, n);
        out.emplace_back(Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n)));
    }
    return out;
}

double block_norm(const Eigen::VectorXd& u, std::size_t begin, std::size_t len) {
    return u.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len)).norm();
}

Eigen::MatrixXd hessian_at(const StatePoint& v, const BellmanConfig& cfg) {
    if (region_of(v, cfg) == Region::Cut) {
        EvalOptions opt;
        opt.domain_slack = kDomainSlack;
        return eval_B(v, cfg, opt).hessian;
    }
    return bellman_hessian(v, cfg);
}

TauResult tau_from_hessian(const Eigen::MatrixXd& H, const StatePoint& v, const BellmanConfig& cfg,
                           std::mt19937_64& rng) {
    TauResult out;
    const auto d = static_cast<Eigen::Index>(v.dim());
    const Eigen::MatrixXd QH = cfg.Q * H;
    const Eigen::MatrixXd Hrs = QH.bottomRightCorner(2, 2);
    Eigen::LLT<Eigen::MatrixXd> llt(Hrs);
    if (llt.info() != Eigen::Success) return out;
    const Eigen::MatrixXd S = QH.topLeftCorner(2 * d, 2 * d) -
                              QH.topRightCorner(2 * d, 2) * llt.solve(QH.bottomLeftCorner(2, 2 * d));

    auto mu = [&](double log_tau) {
        const double a = std::exp(-0.5 * log_tau), b = std::exp(0.5 * log_tau);
        Eigen::VectorXd dinv(2 * d);
        dinv.head(d).setConstant(a);
        dinv.tail(d).setConstant(b);
        return min_eigenvalue(dinv.asDiagonal() * S * dinv.asDiagonal());
    };
    double lo = std::log(cfg.eps / (100.0 * cfg.Q));
    double hi = std::log(100.0 * cfg.Q / cfg.eps);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo), e = lo + g * (hi - lo);
    double fc = mu(c), fe = mu(e);
    for (int it = 0; it < 120 && hi - lo > 1e-10; ++it) {
        if (fc > fe) {
            hi = e;
            e = c;
            fe = fc;
            c = hi - g * (hi - lo);
            fc = mu(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + g * (hi - lo);
            fe = mu(e);
        }
    }
    const double log_tau = fc > fe ? c : e;
    out.tau = std::exp(log_tau);
    out.mu = std::max(fc, fe);

    Eigen::MatrixXd M = QH;
    M.topLeftCorner(d, d).diagonal().array() -= out.tau;
    M.block(d, d, d, d).diagonal().array() -= 1.0 / out.tau;
    out.exact_margin = min_eigenvalue(M) / spectral_norm(QH);

    out.sampled_margin = std::numeric_limits<double>::infinity();
    for (const auto& u : test_directions(v, rng, kRandomDirections)) {
        const double ax = block_norm(u, 0, v.dim()), ay = block_norm(u, v.dim(), v.dim());
        const double m = u.dot(QH * u) - out.tau * ax * ax - ay * ay / out.tau;
        out.sampled_margin = std::min(out.sampled_margin, m);
    }
    out.success = out.exact_margin >= -kTauTolerance && out.sampled_margin >= -kTauTolerance;
    out.within_bounds =
        out.tau >= kTauSlackLo * cfg.eps / cfg.Q && out.tau <= kTauSlackHi * cfg.Q / cfg.eps;
    return out;
}

double one_leg_gap(double bv, double bv0, const std::vector<double>& grad0, const StatePoint& v0,
                   const StatePoint& v, double* linear) {
    const auto a = v.flatten(), b = v0.flatten();
    double lin = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) lin += grad0[j] * (a[j] - b[j]);
    if (linear) *linear = lin;
    return bv - bv0 - lin;
}

double diff_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

void require_domain(const StatePoint& v, const BellmanConfig& cfg) {
    const double t = v.r * v.s;
    const double lo = cfg.eps * (1.0 - kDomainSlack), hi = (1.0 + kDomainSlack) / cfg.eps;
    if (!(t >= 1.0 - kDomainSlack) || !(t <= cfg.Q * (1.0 + kDomainSlack)) || v.r < lo || v.r > hi || v.s < lo ||
        v.s > hi) {
        throw DomainError("point outside D_Q^eps");
    }
}

bool in_domain(const StatePoint& v, const BellmanConfig& cfg) {
    const double t = v.r * v.s;
    return t >= 1.0 && t <= max_rs(cfg) && v.r >= cfg.eps && v.r <= 1.0 / cfg.eps && v.s >= cfg.eps &&
           v.s <= 1.0 / cfg.eps && norm(v.x) >= cfg.ell && norm(v.y) >= cfg.ell;
}

// Running minimum (or maximum) with the first point attaining it.
struct Tracker {
    std::size_t samples = 0;
    std::size_t skipped = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    std::optional<StatePoint> worst;
    double observed_min = std::numeric_limits<double>::infinity();
    double observed_max = -std::numeric_limits<double>::infinity();

    void margin(double m, const StatePoint& v) {
        ++samples;
        if (m < min_margin) {
            min_margin = m;
            worst = v;
        }
    }
    void observe(double o) {
        observed_min = std::min(observed_min, o);
        observed_max = std::max(observed_max, o);
    }
    void merge(const Tracker& o) {
        samples += o.samples;
        skipped += o.skipped;
        if (o.min_margin < min_margin) {
            min_margin = o.min_margin;
            worst = o.worst;
        }
        observed_min = std::min(observed_min, o.observed_min);
        observed_max = std::max(observed_max, o.observed_max);
    }
};

enum CheckId { kSize, kHessian, kOneLeg, kOneLegMollified, kTauCheck, kPartialXX, kPartialYY, kNumChecks };

struct BatchResult {
    std::array<Tracker, kNumChecks> checks;
    std::size_t tau_samples = 0;
    std::size_t tau_failures = 0;
    double tau_min = std::numeric_limits<double>::infinity();
    double tau_max = 0.0;
    bool tau_within = true;
    std::vector<double> exponents;
};

// A partner for the one-leg check: a fresh independent point (large jump) or a
// small multiplicative perturbation of v0 when it stays in the domain.
StatePoint one_leg_partner(const StatePoint& v0, const BellmanConfig& cfg, std::mt19937_64& rng, bool local) {
    if (local) {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        const double t = log_uniform(rng, 1e-4, 1.0);
        StatePoint v = v0;
        const auto ux = random_unit(rng, v0.dim()), uy = random_unit(rng, v0.dim());
        const double nx = norm(v0.x), ny = norm(v0.y);
        for (std::size_t i = 0; i < v0.dim(); ++i) {
            v.x[i] += 0.5 * t * nx * ux[i];
            v.y[i] += 0.5 * t * ny * uy[i];
        }
        v.r *= std::exp(t * U(rng));
        v.s *= std::exp(t * U(rng));
        if (in_domain(v, cfg)) return v;
    }
    return sample_point(rng, cfg);
}

}  // namespace

void SampleSpec::validate() const {
    if (!(Q >= 1.0) || !std::isfinite(Q)) throw ConfigError("Q must be a finite number ≥ 1");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    if (!(ell > 0.0 && ell <= eps / 2.0)) throw ConfigError("ell must lie in (0, eps/2]");
    if (dim < 1) throw ConfigError("dim must be at least 1");
    if (!(exclusion_margin >= kCutTolerance)) throw ConfigError("exclusion margin must be at least the cut tolerance");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
}

BellmanConfig SampleSpec::bellman_config() const {
    BellmanConfig cfg;
    cfg.Q = Q;
    cfg.eps = eps;
    cfg.ell = ell;
    cfg.dim = dim;
    return cfg;
}

std::vector<StatePoint> sample_domain(const SampleSpec& spec) {
    spec.validate();
    const BellmanConfig cfg = spec.bellman_config();
    std::vector<StatePoint> out(spec.count);
    const std::size_t batches = (spec.count + spec.batch_size - 1) / spec.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
        auto rng = substream(spec.seed, kPoints, b);
        const std::size_t end = std::min(spec.count, (b + 1) * spec.batch_size);
        for (std::size_t i = b * spec.batch_size; i < end; ++i) out[i] = sample_point(rng, cfg);
    }
    return out;
}

double cut_distance(const StatePoint& v, const BellmanConfig& cfg) {
    const double nx = norm(v.x), ny = norm(v.y);
    const double K = detail::profile_K(v.r * v.s, cfg.Q);
    const auto q = cut_quantities(nx, ny, v.r, v.s, K);
    return std::min(std::abs(q[0]), std::abs(q[1])) / std::max({nx, ny, 1.0});
}

std::optional<double> check_hessian_lower(const StatePoint& v, const Perturbation& dv, const BellmanConfig& cfg,
                                          double exclusion_margin) {
    require_domain(v, cfg);
    if (cut_distance(v, cfg) < exclusion_margin) return std::nullopt;
    const double form = bellman_hessian_form(v, dv, cfg);
    return form - 2.0 / cfg.Q * norm(dv.dx) * norm(dv.dy);
}

double check_one_leg(const StatePoint& v0, const StatePoint& v, const BellmanConfig& cfg, double constant) {
    require_domain(v0, cfg);
    require_domain(v, cfg);
    const double gap = one_leg_gap(bellman_value(v, cfg), bellman_value(v0, cfg), bellman_gradient(v0, cfg), v0, v,
                                   nullptr);
    return gap - constant / cfg.Q * diff_norm(v.x, v0.x) * diff_norm(v.y, v0.y);
}

double check_one_leg(const StatePoint& v0, const StatePoint& v, const MollifiedBellman& b, double constant) {
    const BellmanConfig& cfg = b.config();
    require_domain(v0, cfg);
    require_domain(v, cfg);
    const double gap = one_leg_gap(b.value(v), b.value(v0), b.gradient(v0), v0, v, nullptr);
    return gap - constant / cfg.Q * diff_norm(v.x, v0.x) * diff_norm(v.y, v0.y);
}

TauResult extract_tau(const StatePoint& v, const BellmanConfig& cfg, std::uint64_t rng_seed) {
    require_domain(v, cfg);
    auto rng = substream(rng_seed, kTau, 0);
    return tau_from_hessian(hessian_at(v, cfg), v, cfg, rng);
}

double partial_xx_constant(const BellmanConfig& cfg) {
    const auto& c = cfg.coeffs;
    const double a = 1.0 - 1.0 / (8.0 * std::sqrt(cfg.Q));
    const double gamma = 1.0 - a * a / cfg.Q;
    return 2.0 * (c.c1 + c.c2 + c.c3 + c.c7 * (2.0 + 1.0 / gamma));
}

double check_partial_xx_bound(const StatePoint& v, const std::vector<double>& dx, const BellmanConfig& cfg) {
    require_domain(v, cfg);
    if (dx.size() != v.dim()) throw InvalidInput("dx dimension mismatch");
    Perturbation p;
    p.dx = dx;
    p.dy.assign(v.dim(), 0.0);
    return partial_xx_constant(cfg) / cfg.eps * sq_norm(dx) - bellman_hessian_form(v, p, cfg);
}

double check_partial_yy_bound(const StatePoint& v, const std::vector<double>& dy, const BellmanConfig& cfg) {
    require_domain(v, cfg);
    if (dy.size() != v.dim()) throw InvalidInput("dy dimension mismatch");
    Perturbation p;
    p.dx.assign(v.dim(), 0.0);
    p.dy = dy;
    return partial_xx_constant(cfg) / cfg.eps * sq_norm(dy) - bellman_hessian_form(v, p, cfg);
}

std::vector<double> b4_gradient(const StatePoint& v, const BellmanConfig& cfg) {
    const std::size_t d = v.dim();
    const double nx = norm(v.x), ny = norm(v.y);
    const double t = v.r * v.s;
    const double K = detail::profile_K(t, cfg.Q);
    const double Kp = detail::profile_K_prime(t, cfg.Q);
    const H4Gradient h = grad_H4(nx, ny, v.r, v.s, K);
    std::vector<double> g(2 * d + 2);
    for (std::size_t i = 0; i < d; ++i) {
        g[i] = nx > 0 ? h.d_norm_x * v.x[i] / nx : 0.0;
        g[d + i] = ny > 0 ? h.d_norm_y * v.y[i] / ny : 0.0;
    }
    g[2 * d] = h.dr + h.dK * Kp * v.s;
    g[2 * d + 1] = h.ds + h.dK * Kp * v.r;
    return g;
}

CutReport check_c1_across_cuts(const BellmanConfig& cfg, std::size_t n, std::uint64_t seed, int jobs) {
    cfg.validate();
    const std::array<double, 3> deltas{1e-2, 1e-3, 1e-4};
    const std::array<const char*, 3> names{"q2", "q1", "corner"};
    CutReport report;
    report.pass = true;
    const std::size_t batch = 64;
    for (std::size_t f = 0; f < names.size(); ++f) {
        CutFamily fam;
        fam.name = names[f];
        std::vector<std::array<double, 3>> mismatch(n);
        const std::size_t batches = (n + batch - 1) / batch;
        parallel_for(batches, jobs, [&](std::size_t b) {
            auto rng = substream(seed, kCuts * 16 + f, b);
            const std::size_t end = std::min(n, (b + 1) * batch);
            for (std::size_t i = b * batch; i < end; ++i) {
                StatePoint v;
                std::tie(v.r, v.s) = sample_rs(rng, cfg);
                const double K = detail::profile_K(v.r * v.s, cfg.Q);
                const auto ux = random_unit(rng, static_cast<std::size_t>(cfg.dim));
                const auto uy = random_unit(rng, static_cast<std::size_t>(cfg.dim));
                double nx = 0.0, ny = 0.0;
                if (f == 1) {
                    // {|y|r = |x|K}: R1 lies on the side of larger |y|.
                    nx = log_uniform(rng, cfg.ell, 1.0 / cfg.eps);
                    ny = nx * K / v.r;
                } else {
                    // {|x|s = |y|K}: R1 lies on the side of larger |x|.
                    ny = f == 2 ? log_uniform(rng, cfg.ell, cfg.eps) : log_uniform(rng, cfg.ell, 1.0 / cfg.eps);
                    nx = ny * K / v.s;
                }
                for (std::size_t k = 0; k < deltas.size(); ++k) {
                    StatePoint plus = v, minus = v;
                    const double up = 1.0 + deltas[k], down = 1.0 - deltas[k];
                    if (f == 1) {
                        plus.x = scaled(ux, nx);
                        minus.x = plus.x;
                        plus.y = scaled(uy, ny * up);
                        minus.y = scaled(uy, ny * down);
                    } else {
                        plus.y = scaled(uy, ny);
                        minus.y = plus.y;
                        plus.x = scaled(ux, nx * up);
                        minus.x = scaled(ux, nx * down);
                    }
                    const auto gp = b4_gradient(plus, cfg);
                    const auto gm = b4_gradient(minus, cfg);
                    const double scale = std::max({norm(gp), norm(gm), std::numeric_limits<double>::min()});
                    mismatch[i][k] = diff_norm(gp, gm) / scale;
                }
            }
        });
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t k = 0; k < deltas.size(); ++k) {
            CutLevel lvl;
            lvl.delta = deltas[k];
            lvl.points = n;
            for (const auto& m : mismatch) lvl.max_mismatch = std::max(lvl.max_mismatch, m[k]);
            fam.levels.push_back(lvl);
            const double lx = std::log(lvl.delta);
            const double ly = std::log(std::max(lvl.max_mismatch, 1e-300));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        const double m = static_cast<double>(deltas.size());
        fam.rate = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        fam.pass = n > 0 && fam.rate >= kCutRateMin && fam.levels.back().max_mismatch < kCutMismatchAtSmallest;
        report.pass = report.pass && fam.pass;
        report.families.push_back(fam);
    }
    return report;
}

CertReport run_certification(const BellmanConfig& cfg, const SampleSpec& spec, const CertOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    spec.validate();
    if (cfg.Q != spec.Q || cfg.eps != spec.eps || cfg.ell != spec.ell || cfg.dim != spec.dim) {
        throw ConfigError("sampling parameters disagree with the Bellman configuration");
    }
    CertReport report;
    report.cfg = cfg;
    report.spec = spec;
    report.tau.bound_lo = cfg.eps / cfg.Q;
    report.tau.bound_hi = cfg.Q / cfg.eps;
    if (spec.count == 0) {
        report.no_samples = true;
        report.pass = true;
        return report;
    }

    const std::vector<StatePoint> points = sample_domain(spec);
    const std::size_t batches = (spec.count + spec.batch_size - 1) / spec.batch_size;
    std::vector<BatchResult> results(batches);
    const MollifiedBellman mollified(cfg);
    const double Q = cfg.Q;
    const double size_c = cfg.size_constant();
    const double cxx = partial_xx_constant(cfg) / cfg.eps;
    const std::size_t d = static_cast<std::size_t>(cfg.dim);

    parallel_for(batches, options.jobs, [&](std::size_t b) {
        auto rng = substream(spec.seed, kChecks, b);
        BatchResult& res = results[b];
        const std::size_t end = std::min(spec.count, (b + 1) * spec.batch_size);
        for (std::size_t i = b * spec.batch_size; i < end; ++i) {
            const StatePoint& v = points[i];
            const double b1 = eval_B1(v);
            const double bv = bellman_value(v, cfg);
            res.checks[kSize].margin((size_c * b1 - bv) / (size_c * b1), v);
            res.checks[kSize].observe(bv / b1);

            // One-leg: alternate large jumps and local perturbations.
            {
                const StatePoint w = one_leg_partner(v, cfg, rng, i % 2 == 1);
                double lin = 0.0;
                const double gap = one_leg_gap(bellman_value(w, cfg), bv, bellman_gradient(v, cfg), v, w, &lin);
                const double pq = diff_norm(w.x, v.x) * diff_norm(w.y, v.y);
                const double scale = std::abs(bellman_value(w, cfg)) + std::abs(bv) + std::abs(lin);
                res.checks[kOneLeg].margin((gap - 2.0 / Q * pq) / scale, v);
                if (pq > 0) res.checks[kOneLeg].observe(Q * gap / pq);
            }
            if (i < spec.mollified_pairs) {
                const StatePoint w = one_leg_partner(v, cfg, rng, false);
                double lin = 0.0;
                const double bw = mollified.value(w), b0 = mollified.value(v);
                const double gap = one_leg_gap(bw, b0, mollified.gradient(v), v, w, &lin);
                const double pq = diff_norm(w.x, v.x) * diff_norm(w.y, v.y);
                const double scale = std::abs(bw) + std::abs(b0) + std::abs(lin);
                res.checks[kOneLegMollified].margin((gap - 1.0 / Q * pq) / scale, v);
                if (pq > 0) res.checks[kOneLegMollified].observe(Q * gap / pq);
            }

            if (cut_distance(v, cfg) < spec.exclusion_margin) {
                for (CheckId c : {kHessian, kTauCheck, kPartialXX, kPartialYY}) ++res.checks[c].skipped;
                continue;
            }
            const Eigen::MatrixXd H = bellman_hessian(v, cfg);
            const double hn = spectral_norm(H);
            for (const auto& u : test_directions(v, rng, kRandomDirections)) {
                const double ax = block_norm(u, 0, d), ay = block_norm(u, d, d);
                const double form = u.dot(H * u);
                res.checks[kHessian].margin((form - 2.0 / Q * ax * ay) / hn, v);
                if (ax * ay > 1e-12) res.checks[kHessian].observe(Q * form / (ax * ay));
            }

            const TauResult tr = tau_from_hessian(H, v, cfg, rng);
            res.checks[kTauCheck].margin(tr.exact_margin, v);
            res.checks[kTauCheck].observe(2.0 * tr.mu);
            ++res.tau_samples;
            if (!tr.success) ++res.tau_failures;
            res.tau_within = res.tau_within && tr.within_bounds;
            res.tau_min = std::min(res.tau_min, tr.tau);
            res.tau_max = std::max(res.tau_max, tr.tau);
            if (i < 128) {
                const double t0 = tr.tau;
                for (double lam : {0.5, 2.0}) {
                    StatePoint w = v;
                    for (double& c : w.x) c *= lam;
                    for (double& c : w.y) c /= lam;
                    if (cut_distance(w, cfg) < spec.exclusion_margin) continue;
                    const TauResult tw = tau_from_hessian(bellman_hessian(w, cfg), w, cfg, rng);
                    if (tw.success && t0 > 0) res.exponents.push_back(std::log(tw.tau / t0) / std::log(lam));
                }
            }

            const Eigen::Index di = static_cast<Eigen::Index>(d);
            const double lx = max_eigenvalue(H.topLeftCorner(di, di));
            const double ly = max_eigenvalue(H.block(di, di, di, di));
            res.checks[kPartialXX].margin((cxx - lx) / cxx, v);
            res.checks[kPartialXX].observe(cfg.eps * lx);
            res.checks[kPartialYY].margin((cxx - ly) / cxx, v);
            res.checks[kPartialYY].observe(cfg.eps * ly);
        }
    });

    BatchResult total;
    for (const auto& r : results) {
        for (int c = 0; c < kNumChecks; ++c) total.checks[c].merge(r.checks[c]);
        total.tau_samples += r.tau_samples;
        total.tau_failures += r.tau_failures;
        total.tau_min = std::min(total.tau_min, r.tau_min);
        total.tau_max = std::max(total.tau_max, r.tau_max);
        total.tau_within = total.tau_within && r.tau_within;
        total.exponents.insert(total.exponents.end(), r.exponents.begin(), r.exponents.end());
    }

    struct Meta {
        const char* name;
        double tolerance;
        bool use_min;
        const char* label;
    };
    const std::array<Meta, kNumChecks> meta{{
        {"size", 0.0, false, "max B/B1"},
        {"hessian_lower", kMarginTolerance, true, "min Q(d2B dV,dV)/(|dx||dy|) over sampled directions"},
        {"one_leg", kMarginTolerance, true, "min Q(B(V)-B(V0)-dB(V0)dV)/(|dx||dy|)"},
        {"one_leg_mollified", kMarginTolerance, true, "min Q(B_l(V)-B_l(V0)-dB_l(V0)dV)/(|dx||dy|)"},
        {"tau", kTauTolerance, true, "min 2*mu(tau), certified lower bound of Q d2B/(|dx||dy|)"},
        {"partial_xx", kMarginTolerance, false, "max eps*lambda_max(d2_x B)"},
        {"partial_yy", kMarginTolerance, false, "max eps*lambda_max(d2_y B)"},
    }};
    report.pass = true;
    for (int c = 0; c < kNumChecks; ++c) {
        const Tracker& t = total.checks[c];
        CheckResult cr;
        cr.name = meta[c].name;
        cr.samples = t.samples;
        cr.skipped = t.skipped;
        cr.min_margin = t.samples ? t.min_margin : 0.0;
        cr.worst_point = t.worst;
        cr.tolerance = meta[c].tolerance;
        cr.observed = t.samples ? (meta[c].use_min ? t.observed_min : t.observed_max) : 0.0;
        cr.observed_label = meta[c].label;
        cr.pass = cr.min_margin >= -cr.tolerance;
        if (c == kTauCheck) cr.pass = cr.pass && total.tau_failures == 0 && total.tau_within;
        report.pass = report.pass && cr.pass;
        report.checks.push_back(cr);
    }

    report.tau.samples = total.tau_samples;
    report.tau.failures = total.tau_failures;
    report.tau.min = total.tau_samples ? total.tau_min : 0.0;
    report.tau.max = total.tau_max;
    report.tau.within_bounds = total.tau_within;
    if (!total.exponents.empty()) {
        auto e = total.exponents;
        std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(e.size() / 2), e.end());
        report.tau.scaling_exponent = e[e.size() / 2];
    }

    if (options.cut_points > 0) {
        report.cuts = check_c1_across_cuts(cfg, options.cut_points, spec.seed, options.jobs);
        for (const auto& fam : report.cuts->families) {
            CheckResult cr;
            cr.name = "c1_" + fam.name;
            cr.samples = fam.levels.empty() ? 0 : fam.levels.front().points * fam.levels.size();
            cr.min_margin = fam.rate - kCutRateMin;
            cr.tolerance = 0.0;
            cr.observed = fam.rate;
            cr.observed_label = "decay rate of one-sided gradient mismatch in delta";
            cr.pass = fam.pass;
            report.pass = report.pass && cr.pass;
            report.checks.push_back(cr);
        }
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string to_structured_text(const CertReport& r) {
    std::ostringstream os;
    os << "certification\n";
    os << "  pass: " << (r.pass ? "true" : "false") << "\n";
    os << "  no_samples: " << (r.no_samples ? "true" : "false") << "\n";
    os << "  config\n";
    os << "    Q: " << fmt(r.cfg.Q) << "\n";
    os << "    eps: " << fmt(r.cfg.eps) << "\n";
    os << "    ell: " << fmt(r.cfg.ell) << "\n";
    os << "    dim: " << r.cfg.dim << "\n";
    os << "    c1: " << fmt(r.cfg.coeffs.c1) << "\n";
    os << "    c2: " << fmt(r.cfg.coeffs.c2) << "\n";
    os << "    c3: " << fmt(r.cfg.coeffs.c3) << "\n";
    os << "    c7: " << fmt(r.cfg.coeffs.c7) << "\n";
    os << "    size_constant: " << fmt(r.cfg.size_constant()) << "\n";
    os << "    partial_xx_constant: " << fmt(partial_xx_constant(r.cfg)) << "\n";
    os << "  sampling\n";
    os << "    count: " << r.spec.count << "\n";
    os << "    seed: " << r.spec.seed << "\n";
    os << "    exclusion_margin: " << fmt(r.spec.exclusion_margin) << "\n";
    os << "    mollified_pairs: " << r.spec.mollified_pairs << "\n";
    for (const auto& c : r.checks) {
        os << "  check " << c.name << "\n";
        os << "    samples: " << c.samples << "\n";
        os << "    skipped: " << c.skipped << "\n";
        os << "    min_margin: " << fmt(c.min_margin) << "\n";
        os << "    tolerance: " << fmt(c.tolerance) << "\n";
        os << "    observed: " << fmt(c.observed) << "\n";
        os << "    observed_meaning: " << c.observed_label << "\n";
        os << "    pass: " << (c.pass ? "true" : "false") << "\n";
        if (c.worst_point) {
            os << "    worst_point\n";
            os << "      x: " << fmt_vec(c.worst_point->x) << "\n";
            os << "      y: " << fmt_vec(c.worst_point->y) << "\n";
            os << "      r: " << fmt(c.worst_point->r) << "\n";
            os << "      s: " << fmt(c.worst_point->s) << "\n";
        }
    }
    os << "  tau\n";
    os << "    samples: " << r.tau.samples << "\n";
    os << "    failures: " << r.tau.failures << "\n";
    os << "    min: " << fmt(r.tau.min) << "\n";
    os << "    max: " << fmt(r.tau.max) << "\n";
    os << "    bound_lo: " << fmt(r.tau.bound_lo) << "\n";
    os << "    bound_hi: " << fmt(r.tau.bound_hi) << "\n";
    os << "    slack_lo: " << fmt(kTauSlackLo) << "\n";
    os << "    slack_hi: " << fmt(kTauSlackHi) << "\n";
    os << "    within_bounds: " << (r.tau.within_bounds ? "true" : "false") << "\n";
    os << "    scaling_exponent: " << fmt(r.tau.scaling_exponent) << "\n";
    if (r.cuts) {
        os << "  cuts\n";
        os << "    pass: " << (r.cuts->pass ? "true" : "false") << "\n";
        for (const auto& f : r.cuts->families) {
            os << "    family " << f.name << "\n";
            os << "      rate: " << fmt(f.rate) << "\n";
            os << "      pass: " << (f.pass ? "true" : "false") << "\n";
            for (const auto& l : f.levels) {
                os << "      level " << fmt(l.delta) << "\n";
                os << "        points: " << l.points << "\n";
                os << "        max_mismatch: " << fmt(l.max_mismatch) << "\n";
            }
        }
    }
    return os.str();
}

std::string to_csv(const CertReport& r) {
    std::ostringstream os;
    os << "check,samples,skipped,min_margin,tolerance,observed,pass\n";
    for (const auto& c : r.checks) {
        os << c.name << "," << c.samples << "," << c.skipped << "," << fmt(c.min_margin) << "," << fmt(c.tolerance)
           << "," << fmt(c.observed) << "," << (c.pass ? "true" : "false") << "\n";
    }
    return os.str();
}

std::vector<TauSweepRow> tau_sweep(const BellmanConfig& cfg, const SampleSpec& spec, int jobs) {
    cfg.validate();
    const std::vector<StatePoint> points = sample_domain(spec);
    std::vector<TauSweepRow> rows(points.size());
    const std::size_t batches = (points.size() + spec.batch_size - 1) / spec.batch_size;
    parallel_for(batches, jobs, [&](std::size_t b) {
        auto rng = substream(spec.seed, kTau, b);
        const std::size_t end = std::min(points.size(), (b + 1) * spec.batch_size);
        for (std::size_t i = b * spec.batch_size; i < end; ++i) {
            const StatePoint& v = points[i];
            const TauResult tr = tau_from_hessian(hessian_at(v, cfg), v, cfg, rng);
            rows[i] = {i, v.r, v.s, norm(v.x), norm(v.y), tr.tau, tr.success && tr.within_bounds};
        }
    });
    return rows;
}

std::string tau_sweep_csv(const std::vector<TauSweepRow>& rows) {
    std::ostringstream os;
    os << "id,r,s,norm_x,norm_y,tau\n";
    for (const auto& row : rows) {
        os << row.id << "," << fmt(row.r) << "," << fmt(row.s) << "," << fmt(row.norm_x) << "," << fmt(row.norm_y)
           << "," << fmt(row.tau) << "\n";
    }
    return os.str();
}

}  // namespace wdsub

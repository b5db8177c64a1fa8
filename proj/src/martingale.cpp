#include "wdsub/martingale.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "wdsub/errors.hpp"
#include "wdsub/mollify.hpp"
#include "wdsub/parallel.hpp"

namespace wdsub {
namespace {

enum Stream : std::uint64_t { kMainTest = 21, kSharp = 22 };

void check_depth(int depth) {
    if (depth < 0 || depth > kMaxMartingaleDepth) throw InvalidInput("martingale depth out of range");
}

double dot(const double* a, const double* b, int d) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += a[j] * b[j];
    return acc;
}

double vnorm(const double* a, int d) { return std::sqrt(dot(a, a, d)); }

void require_same_shape(const DyadicMartingale& a, const DyadicMartingale& b) {
    if (a.depth() != b.depth() || a.dim() != b.dim()) throw InvalidInput("martingales differ in depth or dimension");
}

void require_weight_depth(const DyadicMartingale& x, const WeightTree& w) {
    if (x.depth() != w.depth()) throw InvalidInput("weight and martingale differ in depth");
}

DyadicMartingale first_coordinates(const DyadicMartingale& x, int k) {
    std::vector<double> leaves(x.leaf_count() * k);
    for (std::size_t i = 0; i < x.leaf_count(); ++i) {
        const double* v = x.value(x.first_leaf() + i);
        std::copy(v, v + k, leaves.begin() + i * k);
    }
    return DyadicMartingale::from_leaves(x.depth(), k, leaves);
}

}  // namespace

int node_level(std::size_t node) { return static_cast<int>(std::bit_width(node)) - 1; }

DyadicMartingale DyadicMartingale::from_leaves(int depth, int dim, const std::vector<double>& leaves) {
    check_depth(depth);
    if (dim < 1) throw InvalidInput("martingale dimension must be positive");
    const std::size_t n = std::size_t{1} << depth;
    if (leaves.size() != n * dim) throw InvalidInput("martingale needs 2^depth leaf rows");
    for (double v : leaves) {
        if (!std::isfinite(v)) throw InvalidInput("martingale values must be finite");
    }
    DyadicMartingale m;
    m.depth_ = depth;
    m.dim_ = dim;
    m.values_.assign(2 * n * dim, 0.0);
    std::copy(leaves.begin(), leaves.end(), m.values_.begin() + n * dim);
    for (std::size_t i = n - 1; i >= 1; --i) {
        for (int j = 0; j < dim; ++j) {
            m.values_[i * dim + j] = 0.5 * (m.values_[2 * i * dim + j] + m.values_[(2 * i + 1) * dim + j]);
        }
    }
    return m;
}

DyadicMartingale DyadicMartingale::from_increments(int depth, int dim, const std::vector<double>& x0,
                                                   const std::vector<double>& increments) {
    check_depth(depth);
    const std::size_t n = std::size_t{1} << depth;
    if (static_cast<int>(x0.size()) != dim || increments.size() != n * dim) {
        throw InvalidInput("increment data has the wrong size");
    }
    std::vector<double> v(2 * n * dim, 0.0);
    std::copy(x0.begin(), x0.end(), v.begin() + dim);
    for (std::size_t i = 1; i < n; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double p = v[i * dim + j], dx = increments[i * dim + j];
            v[2 * i * dim + j] = p + dx;
            v[(2 * i + 1) * dim + j] = p - dx;
        }
    }
    return from_leaves(depth, dim, std::vector<double>(v.begin() + n * dim, v.end()));
}

std::vector<double> DyadicMartingale::value_vector(std::size_t node) const {
    const double* v = value(node);
    return std::vector<double>(v, v + dim_);
}

std::vector<double> DyadicMartingale::increment(std::size_t node) const {
    if (node < 1 || node >= leaf_count()) throw InvalidInput("increments live on internal nodes");
    std::vector<double> d(dim_);
    const double* a = value(2 * node);
    const double* b = value(2 * node + 1);
    for (int j = 0; j < dim_; ++j) d[j] = 0.5 * (a[j] - b[j]);
    return d;
}

std::vector<double> DyadicMartingale::increments() const {
    std::vector<double> out(leaf_count() * dim_);
    std::copy(value(1), value(1) + dim_, out.begin());
    for (std::size_t i = 1; i < leaf_count(); ++i) {
        const double* a = value(2 * i);
        const double* b = value(2 * i + 1);
        for (int j = 0; j < dim_; ++j) out[i * dim_ + j] = 0.5 * (a[j] - b[j]);
    }
    return out;
}

std::vector<double> DyadicMartingale::leaves() const {
    return std::vector<double>(values_.begin() + leaf_count() * dim_, values_.end());
}

double DyadicMartingale::martingale_defect() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < leaf_count(); ++i) {
        for (int j = 0; j < dim_; ++j) {
            const double avg = 0.5 * (value(2 * i)[j] + value(2 * i + 1)[j]);
            worst = std::max(worst, std::abs(value(i)[j] - avg));
        }
    }
    return worst;
}

void SimConfig::validate() const {
    if (depth < 0 || depth > kMaxMartingaleDepth) throw ConfigError("depth must lie in [0, 20]");
    if (dim < 1) throw ConfigError("dim must be at least 1");
}

DyadicMartingale random_martingale(int depth, int dim, std::mt19937_64& rng) {
    check_depth(depth);
    std::normal_distribution<double> G(0.0, 1.0);
    std::vector<double> leaves((std::size_t{1} << depth) * dim);
    for (double& v : leaves) v = G(rng);
    return DyadicMartingale::from_leaves(depth, dim, leaves);
}

DyadicMartingale random_martingale(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    return random_martingale(cfg.depth, cfg.dim, rng);
}

DyadicMartingale transform(const DyadicMartingale& x, const std::vector<double>& sigma) {
    if (sigma.size() != x.leaf_count()) throw InvalidInput("sigma needs one multiplier per internal node plus the root");
    for (double s : sigma) {
        if (!(std::abs(s) <= 1.0)) throw InvalidInput("multipliers must satisfy |sigma| <= 1");
    }
    const int d = x.dim();
    std::vector<double> inc = x.increments();
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        for (int j = 0; j < d; ++j) inc[i * d + j] *= sigma[i];
    }
    std::vector<double> y0(inc.begin(), inc.begin() + d);
    return DyadicMartingale::from_increments(x.depth(), d, y0, inc);
}

std::vector<double> random_orthogonal(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> G(0.0, 1.0);
    Eigen::MatrixXd A(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) A(i, j) = G(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Qm = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j) {
        if (R(j, j) < 0) Qm.col(j) *= -1.0;
    }
    std::vector<double> out(dim * dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) out[i * dim + j] = Qm(i, j);
    }
    return out;
}

DyadicMartingale rotate_increments(const DyadicMartingale& x, std::mt19937_64& rng) {
    const int d = x.dim();
    const std::vector<double> inc = x.increments();
    std::vector<double> out(inc.size());
    for (std::size_t i = 0; i < x.leaf_count(); ++i) {
        const std::vector<double> R = random_orthogonal(d, rng);
        for (int a = 0; a < d; ++a) {
            double acc = 0.0;
            for (int b = 0; b < d; ++b) acc += R[a * d + b] * inc[i * d + b];
            out[i * d + a] = acc;
        }
    }
    std::vector<double> y0(out.begin(), out.begin() + d);
    return DyadicMartingale::from_increments(x.depth(), d, y0, out);
}

SubordinationResult check_subordination(const DyadicMartingale& x, const DyadicMartingale& y) {
    if (x.depth() != y.depth()) throw InvalidInput("martingales differ in depth");
    if (y.dim() > x.dim()) throw InvalidInput("Y has more coordinates than X");
    const std::vector<double> dx = x.increments(), dy = y.increments();
    double scale = 0.0;
    for (std::size_t i = 1; i < x.node_count(); ++i) scale = std::max(scale, vnorm(x.value(i), x.dim()));
    const double abs_tol = kSubordinationTolerance * scale;
    SubordinationResult res;
    for (std::size_t i = 0; i < x.leaf_count(); ++i) {
        const double nx = vnorm(dx.data() + i * x.dim(), x.dim());
        const double ny = vnorm(dy.data() + i * y.dim(), y.dim());
        if (ny > nx * (1.0 + kSubordinationTolerance) + abs_tol) {
            res.subordinate = false;
            res.first_violation = i;
            res.norm_x = nx;
            res.norm_y = ny;
            return res;
        }
    }
    return res;
}

double weighted_norm(const DyadicMartingale& x, const WeightTree& w) {
    require_weight_depth(x, w);
    double acc = 0.0;
    for (std::size_t k = 0; k < x.leaf_count(); ++k) {
        const double* v = x.value(x.first_leaf() + k);
        acc += dot(v, v, x.dim()) * w.leaves()[k];
    }
    return std::sqrt(acc / x.leaf_count());
}

double weighted_norm_inverse(const DyadicMartingale& x, const WeightTree& w) {
    require_weight_depth(x, w);
    double acc = 0.0;
    for (std::size_t k = 0; k < x.leaf_count(); ++k) {
        const double* v = x.value(x.first_leaf() + k);
        acc += dot(v, v, x.dim()) / w.leaves()[k];
    }
    return std::sqrt(acc / x.leaf_count());
}

double bilinear_form(const DyadicMartingale& y, const DyadicMartingale& z) {
    require_same_shape(y, z);
    const int d = y.dim();
    const std::vector<double> dy = y.increments(), dz = z.increments();
    double acc = std::abs(dot(dy.data(), dz.data(), d));
    for (std::size_t i = 1; i < y.leaf_count(); ++i) {
        acc += std::ldexp(std::abs(dot(dy.data() + i * d, dz.data() + i * d, d)), -node_level(i));
    }
    return acc;
}

double increment_product(const DyadicMartingale& x, const DyadicMartingale& z) {
    if (x.depth() != z.depth()) throw InvalidInput("martingales differ in depth");
    const std::vector<double> dx = x.increments(), dz = z.increments();
    const int a = x.dim(), b = z.dim();
    double acc = vnorm(dx.data(), a) * vnorm(dz.data(), b);
    for (std::size_t i = 1; i < x.leaf_count(); ++i) {
        acc += std::ldexp(vnorm(dx.data() + i * a, a) * vnorm(dz.data() + i * b, b), -node_level(i));
    }
    return acc;
}

double terminal_inner(const DyadicMartingale& y, const DyadicMartingale& z) {
    require_same_shape(y, z);
    double acc = 0.0;
    for (std::size_t k = 0; k < y.leaf_count(); ++k) {
        acc += dot(y.value(y.first_leaf() + k), z.value(z.first_leaf() + k), y.dim());
    }
    return acc / y.leaf_count();
}

SampledEstimate sampled_square_norm(const DyadicMartingale& x, std::size_t paths, std::mt19937_64& rng) {
    if (paths < 2) throw InvalidInput("need at least two paths");
    std::bernoulli_distribution coin(0.5);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        std::size_t node = 1;
        for (int l = 0; l < x.depth(); ++l) node = 2 * node + (coin(rng) ? 1 : 0);
        const double v = dot(x.value(node), x.value(node), x.dim());
        sum += v;
        sum2 += v * v;
    }
    const double n = static_cast<double>(paths);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    return {mean, std::sqrt(var / n)};
}

BilinearResult verify_bilinear_estimate(const DyadicMartingale& x, const DyadicMartingale& y,
                                        const DyadicMartingale& z, const WeightTree& w, double C_target,
                                        const BellmanConfig& cfg) {
    require_same_shape(y, z);
    const SubordinationResult sub = check_subordination(x, y);
    if (!sub.subordinate) {
        throw InvalidInput("Y is not subordinate to X at node " + std::to_string(*sub.first_violation));
    }
    BilinearResult res;
    res.Q2 = a2_characteristic(w);
    const double nx = weighted_norm(x, w), nz = weighted_norm_inverse(z, w);
    res.EF = nx * nx;
    res.EG = nz * nz;
    res.lhs = bilinear_form(y, z);
    res.rhs = res.Q2 * nx * nz;
    res.ratio = res.rhs > 0 ? res.lhs / res.rhs : (res.lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    res.pass = res.lhs <= C_target * res.rhs;
    res.lambda_sq = (res.EF > 0 && res.EG > 0) ? std::sqrt(res.EG) / std::sqrt(res.EF) : 1.0;
    const double C = cfg.size_constant();
    res.bellman_bound_unit = 0.5 * res.Q2 * C * (res.EF + res.EG);
    res.bellman_bound_opt = 0.5 * res.Q2 * C * (res.lambda_sq * res.EF + res.EG / res.lambda_sq);
    const double product = increment_product(x, z);
    res.within_bellman_bound = res.lhs <= product * (1 + 1e-12) && product <= res.bellman_bound_opt * (1 + 1e-12);
    return res;
}

TelescopeResult bellman_telescope(const DyadicMartingale& x, const DyadicMartingale& z, const WeightTree& w,
                                  const BellmanConfig& cfg, const TelescopeOptions& options) {
    require_same_shape(x, z);
    require_weight_depth(x, w);
    const double a = options.a > 0 ? options.a : cfg.ell;
    if (a < cfg.ell) {
        throw DomainError("anchor a = " + std::to_string(a) + " is below ell = " + std::to_string(cfg.ell));
    }
    const int d = x.dim();
    const double c = options.mollified ? 1.0 : 2.0;
    const double slack = options.domain_slack;

    auto state = [&](const double* xv, const double* zv, std::size_t node) {
        StatePoint v;
        v.x.assign(d + 1, 0.0);
        v.y.assign(d + 1, 0.0);
        v.x[0] = a;
        v.y[0] = a;
        if (xv) std::copy(xv, xv + d, v.x.begin() + 1);
        if (zv) std::copy(zv, zv + d, v.y.begin() + 1);
        v.r = w.avg_u(node);
        v.s = w.avg_w(node);
        const double t = v.r * v.s;
        if (v.r < cfg.eps * (1 - slack) || v.s < cfg.eps * (1 - slack) || v.r > (1 + slack) / cfg.eps ||
            v.s > (1 + slack) / cfg.eps) {
            throw DomainError("weight averages leave [eps, 1/eps] at node " + std::to_string(node) +
                              "; truncate the weight first");
        }
        if (t > cfg.Q * (1 + slack) || t < 1 - slack) {
            throw DomainError("weight characteristic exceeds Q at node " + std::to_string(node));
        }
        return v;
    };
    auto value = [&](const StatePoint& v) {
        return options.mollified ? options.mollified->value(v) : bellman_value(v, cfg);
    };
    auto gradient = [&](const StatePoint& v) {
        return options.mollified ? options.mollified->gradient(v) : bellman_gradient(v, cfg);
    };
    auto diff = [&](const StatePoint& p, const StatePoint& q, double* lin, double* lin_abs,
                    const std::vector<double>& g) {
        const auto fp = p.flatten(), fq = q.flatten();
        double s = 0.0, sa = 0.0;
        for (std::size_t j = 0; j < fp.size(); ++j) {
            s += g[j] * (fq[j] - fp[j]);
            sa += std::abs(g[j] * (fq[j] - fp[j]));
        }
        *lin = s;
        *lin_abs = sa;
    };
    auto jump = [&](const StatePoint& p, const StatePoint& q) {
        double ax = 0.0, az = 0.0;
        for (int j = 0; j <= d; ++j) {
            ax += (q.x[j] - p.x[j]) * (q.x[j] - p.x[j]);
            az += (q.y[j] - p.y[j]) * (q.y[j] - p.y[j]);
        }
        return c / cfg.Q * std::sqrt(ax) * std::sqrt(az);
    };

    TelescopeResult res;
    res.per_step_margins.assign(x.depth() + 1, std::numeric_limits<double>::infinity());
    res.min_margin = std::numeric_limits<double>::infinity();

    const StatePoint start = state(nullptr, nullptr, 1);
    const StatePoint root = state(x.value(1), z.value(1), 1);
    res.b_start = value(start);
    {
        const auto g = gradient(start);
        double lin = 0.0, lin_abs = 0.0;
        diff(start, root, &lin, &lin_abs, g);
        const double gap = value(root) - res.b_start - lin;
        const double j = jump(start, root);
        res.lhs += j;
        res.sum_increments += gap;
        res.per_step_margins[0] = gap - j;
        res.min_margin = gap - j;
    }

    const std::size_t leaves = x.leaf_count();
    for (std::size_t node = 1; node < leaves; ++node) {
        const int level = node_level(node);
        const double weight = std::ldexp(1.0, -(level + 1));
        const StatePoint p = state(x.value(node), z.value(node), node);
        const double bp = value(p);
        const auto g = gradient(p);
        double lin_sum = 0.0, lin_scale = 0.0;
        for (std::size_t child : {2 * node, 2 * node + 1}) {
            const StatePoint q = state(x.value(child), z.value(child), child);
            double lin = 0.0, lin_abs = 0.0;
            diff(p, q, &lin, &lin_abs, g);
            const double gap = value(q) - bp - lin;
            const double j = jump(p, q);
            const double margin = gap - j;
            res.lhs += weight * j;
            res.sum_increments += weight * gap;
            res.per_step_margins[level + 1] = std::min(res.per_step_margins[level + 1], margin);
            if (margin < res.min_margin) {
                res.min_margin = margin;
                res.worst_node = child;
            }
            lin_sum += lin;
            lin_scale += lin_abs;
        }
        if (lin_scale > 0) res.max_linear_residual = std::max(res.max_linear_residual, std::abs(lin_sum) / lin_scale);
    }

    double b_end = 0.0;
    for (std::size_t k = 0; k < leaves; ++k) {
        b_end += value(state(x.value(leaves + k), z.value(leaves + k), leaves + k));
    }
    res.b_end = b_end / leaves;
    const double nx = weighted_norm(x, w), nz = weighted_norm_inverse(z, w);
    res.EF = nx * nx;
    res.EG = nz * nz;
    res.bellman_bound = cfg.size_constant() * (res.EF + res.EG + 2.0 * a * a / cfg.eps);

    const double tol = 1e-12 * (std::abs(res.b_end) + std::abs(res.b_start) + res.lhs);
    res.aggregate_ok = res.lhs <= res.sum_increments + tol &&
                       std::abs(res.sum_increments - (res.b_end - res.b_start)) <=
                           options.linear_tolerance * (std::abs(res.b_end) + std::abs(res.b_start)) + tol &&
                       res.b_end <= res.bellman_bound;
    res.pass = res.min_margin >= -options.margin_tolerance && res.max_linear_residual <= options.linear_tolerance &&
               res.aggregate_ok;
    return res;
}

std::vector<AnchorSensitivity> anchor_sensitivity(const DyadicMartingale& x, const DyadicMartingale& z,
                                                  const WeightTree& w, const BellmanConfig& cfg) {
    std::vector<AnchorSensitivity> out;
    for (double factor : {1.0, 2.0, 10.0}) {
        TelescopeOptions opt;
        opt.a = factor * cfg.ell;
        const TelescopeResult t = bellman_telescope(x, z, w, cfg, opt);
        out.push_back({opt.a, t.lhs, t.bellman_bound, t.min_margin, t.pass});
    }
    return out;
}

MainTheoremResult verify_main_theorem(const DyadicMartingale& x, const DyadicMartingale& y, const WeightTree& w,
                                      double C_target, std::uint64_t seed, std::size_t test_functions) {
    const SubordinationResult sub = check_subordination(x, y);
    if (!sub.subordinate) {
        throw InvalidInput("Y is not subordinate to X at node " + std::to_string(*sub.first_violation));
    }
    require_weight_depth(y, w);
    MainTheoremResult res;
    res.Q2 = a2_characteristic(w);
    const double nx = weighted_norm(x, w), ny = weighted_norm(y, w);

    const int d = y.dim();
    std::vector<double> zl = y.leaves();
    for (std::size_t k = 0; k < y.leaf_count(); ++k) {
        for (int j = 0; j < d; ++j) zl[k * d + j] *= w.leaves()[k];
    }
    const DyadicMartingale z = DyadicMartingale::from_leaves(y.depth(), d, zl);
    const double nz = weighted_norm_inverse(z, w);
    res.dual_extremal = nz > 0 ? terminal_inner(y, z) / nz : 0.0;
    res.duality_gap = ny > 0 ? std::abs(res.dual_extremal - ny) / ny : std::abs(res.dual_extremal);

    auto rng = substream(seed, kMainTest, 0);
    for (std::size_t i = 0; i < test_functions; ++i) {
        const DyadicMartingale t = random_martingale(y.depth(), d, rng);
        const double nt = weighted_norm_inverse(t, w);
        if (nt > 0) res.dual_random = std::max(res.dual_random, std::abs(terminal_inner(y, t)) / nt);
    }
    res.lhs = std::max(res.dual_extremal, res.dual_random);
    res.rhs = res.Q2 * nx;
    res.ratio = res.rhs > 0 ? res.lhs / res.rhs : (res.lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    res.pass = res.lhs <= C_target * res.rhs;
    const double denom = res.Q2 * nx * nz;
    res.bilinear_ratio = denom > 0 ? bilinear_form(y, z) / denom : 0.0;
    return res;
}

ProjectionReport projection_consistency(const DyadicMartingale& x, const DyadicMartingale& y, const WeightTree& w,
                                        int d_sub) {
    require_same_shape(x, y);
    require_weight_depth(x, w);
    const int dim = x.dim();
    if (d_sub < 1 || d_sub > dim) throw InvalidInput("d_sub must lie in [1, dim]");

    auto tail = [&](int k) {
        const std::vector<double> dx = x.increments(), dy = y.increments();
        double acc = 0.0;
        for (std::size_t i = 0; i < x.leaf_count(); ++i) {
            double a = 0.0, b = 0.0;
            for (int j = k; j < dim; ++j) {
                a += dx[i * dim + j] * dx[i * dim + j];
                b += dy[i * dim + j] * dy[i * dim + j];
            }
            acc += std::ldexp(std::sqrt(a) * std::sqrt(b), i == 0 ? 0 : -node_level(i));
        }
        return acc;
    };
    auto row = [&](int k) {
        const DyadicMartingale px = k == dim ? x : first_coordinates(x, k);
        const DyadicMartingale py = k == dim ? y : first_coordinates(y, k);
        return ProjectionRow{k, weighted_norm(px, w), weighted_norm(py, w), bilinear_form(px, py),
                             increment_product(px, py), tail(k)};
    };

    ProjectionReport rep;
    for (int k = 1; k <= d_sub; ++k) rep.rows.push_back(row(k));
    if (d_sub < dim) rep.rows.push_back(row(dim));
    const ProjectionRow& full = rep.rows.back();

    const double rel = 1e-12;
    rep.monotone = true;
    rep.dominated = true;
    rep.bilinear_within_tail = true;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const ProjectionRow& r = rep.rows[i];
        if (i > 0) {
            const ProjectionRow& p = rep.rows[i - 1];
            rep.monotone = rep.monotone && r.norm_x >= p.norm_x * (1 - rel) && r.norm_y >= p.norm_y * (1 - rel) &&
                           r.increment_product >= p.increment_product * (1 - rel);
        }
        rep.dominated = rep.dominated && r.norm_x <= full.norm_x * (1 + rel) && r.norm_y <= full.norm_y * (1 + rel) &&
                        r.increment_product <= full.increment_product * (1 + rel);
        rep.bilinear_within_tail =
            rep.bilinear_within_tail && r.bilinear <= (full.bilinear + r.tail_bound) * (1 + rel) + 1e-300;
    }
    const ProjectionRow direct{dim, weighted_norm(x, w), weighted_norm(y, w), bilinear_form(x, y),
                               increment_product(x, y), 0.0};
    rep.exact_at_full = full.norm_x == direct.norm_x && full.norm_y == direct.norm_y &&
                        full.bilinear == direct.bilinear && full.increment_product == direct.increment_product &&
                        full.tail_bound == 0.0;
    rep.pass = rep.monotone && rep.dominated && rep.exact_at_full && rep.bilinear_within_tail;
    return rep;
}

namespace {

// Scalar Haar machinery on 2ⁿ leaves for the sharpness search.
struct Haar {
    int depth;
    std::size_t n;
    std::vector<double> w;

    // coefficient vector: entry 0 is the mean, entry I the half difference at node I
    std::vector<double> analyse(const std::vector<double>& f) const {
        std::vector<double> m(2 * n);
        std::copy(f.begin(), f.end(), m.begin() + n);
        for (std::size_t i = n - 1; i >= 1; --i) m[i] = 0.5 * (m[2 * i] + m[2 * i + 1]);
        std::vector<double> c(n);
        c[0] = m[1];
        for (std::size_t i = 1; i < n; ++i) c[i] = 0.5 * (m[2 * i] - m[2 * i + 1]);
        return c;
    }

    std::vector<double> synthesise(const std::vector<double>& c, const std::vector<double>& sigma) const {
        std::vector<double> v(2 * n);
        v[1] = sigma[0] * c[0];
        for (std::size_t i = 1; i < n; ++i) {
            v[2 * i] = v[i] + sigma[i] * c[i];
            v[2 * i + 1] = v[i] - sigma[i] * c[i];
        }
        return std::vector<double>(v.begin() + n, v.end());
    }

    double wmean(const std::vector<double>& f) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += f[k] * f[k] * w[k];
        return acc / n;
    }

    // Top eigenvector of w⁻¹ T w T, starting from f; returns the Rayleigh ratio².
    double power(std::vector<double>& f, const std::vector<double>& sigma, int iterations) const {
        double rq = 0.0;
        for (int it = 0; it < iterations; ++it) {
            std::vector<double> g = synthesise(analyse(f), sigma);
            for (std::size_t k = 0; k < n; ++k) g[k] *= w[k];
            f = synthesise(analyse(g), sigma);
            for (std::size_t k = 0; k < n; ++k) f[k] /= w[k];
            const double nf = std::sqrt(wmean(f));
            if (!(nf > 0)) return 0.0;
            for (double& v : f) v /= nf;
        }
        const std::vector<double> tf = synthesise(analyse(f), sigma);
        rq = wmean(tf) / wmean(f);
        return rq;
    }

    // Level-wise greedy flips of sigma for fixed f. Nodes on one level have
    // disjoint supports, so their flip gains do not interact.
    void greedy(const std::vector<double>& f, std::vector<double>& sigma) const {
        const std::vector<double> c = analyse(f);
        std::vector<double> g = synthesise(c, sigma);
        std::vector<double> S(2 * n), Sw(2 * n);
        for (std::size_t k = 0; k < n; ++k) Sw[n + k] = w[k];
        for (std::size_t i = n - 1; i >= 1; --i) Sw[i] = Sw[2 * i] + Sw[2 * i + 1];
        const double inv = 1.0 / static_cast<double>(n);

        auto refresh = [&] {
            for (std::size_t k = 0; k < n; ++k) S[n + k] = g[k] * w[k];
            for (std::size_t i = n - 1; i >= 1; --i) S[i] = S[2 * i] + S[2 * i + 1];
        };
        refresh();
        {
            const double gain = -4.0 * sigma[0] * c[0] * S[1] * inv + 4.0 * c[0] * c[0] * Sw[1] * inv;
            if (gain > 0) {
                for (std::size_t k = 0; k < n; ++k) g[k] -= 2.0 * sigma[0] * c[0];
                sigma[0] = -sigma[0];
                refresh();
            }
        }
        for (int level = 0; level < depth; ++level) {
            const std::size_t lo = std::size_t{1} << level, hi = lo << 1;
            const std::size_t width = n >> (level + 1);
            bool flipped = false;
            for (std::size_t i = lo; i < hi; ++i) {
                const double A = (S[2 * i] - S[2 * i + 1]) * inv;
                const double gain = -4.0 * sigma[i] * c[i] * A + 4.0 * c[i] * c[i] * Sw[i] * inv;
                if (gain > 0) {
                    const std::size_t left = (i - lo) * 2 * width;
                    const double step = 2.0 * sigma[i] * c[i];
                    for (std::size_t k = left; k < left + width; ++k) g[k] -= step;
                    for (std::size_t k = left + width; k < left + 2 * width; ++k) g[k] += step;
                    sigma[i] = -sigma[i];
                    flipped = true;
                }
            }
            if (flipped) refresh();
        }
    }
};

}  // namespace

double sharpness_ratio(const WeightTree& w, const SharpnessOptions& options, std::uint64_t stream) {
    Haar h{w.depth(), w.leaf_count(), w.leaves()};
    const int restarts = std::max(1, options.restarts);
    std::vector<double> best(restarts, 0.0);
    parallel_for(static_cast<std::size_t>(restarts), options.jobs, [&](std::size_t r) {
        auto rng = substream(options.seed, kSharp * 1000003 + stream, r);
        std::normal_distribution<double> G(0.0, 1.0);
        std::bernoulli_distribution coin(0.5);
        std::vector<double> sigma(h.n, 1.0), f(h.n);
        if (r > 0) {
            for (double& s : sigma) s = coin(rng) ? 1.0 : -1.0;
        }
        for (double& v : f) v = G(rng);
        double value = 0.0;
        for (int round = 0; round < options.rounds; ++round) {
            const double rq = h.power(f, sigma, options.power_iterations);
            h.greedy(f, sigma);
            const double after = h.wmean(h.synthesise(h.analyse(f), sigma)) / h.wmean(f);
            const double next = std::max(rq, after);
            if (next <= value * (1 + 1e-12)) {
                value = std::max(value, next);
                break;
            }
            value = next;
        }
        best[r] = std::sqrt(value);
    });
    return *std::max_element(best.begin(), best.end());
}

SharpnessResult sharpness_experiment(const std::vector<double>& delta_grid, int depth,
                                     const SharpnessOptions& options) {
    if (depth < 0 || depth > 14) throw ConfigError("sharpness depth must lie in [0, 14]");
    SharpnessResult res;
    for (std::size_t i = 0; i < delta_grid.size(); ++i) {
        const WeightTree w = power_weight_family(delta_grid[i], depth);
        SharpnessRow row;
        row.delta = delta_grid[i];
        row.depth = depth;
        row.Q2 = a2_characteristic(w);
        row.worst_ratio = sharpness_ratio(w, options, i);
        res.max_ratio_over_Q2 = std::max(res.max_ratio_over_Q2, row.worst_ratio / row.Q2);
        res.rows.push_back(row);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& r : res.rows) {
        if (!(r.Q2 > 1.0 + 1e-9)) continue;
        const double lx = std::log(r.Q2), ly = std::log(r.worst_ratio);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    const double den = m * sxx - sx * sx;
    if (m >= 2 && den > 0) {
        res.slope = (m * sxy - sx * sy) / den;
        res.intercept = (sy - res.slope * sx) / m;
    } else {
        res.slope = std::numeric_limits<double>::quiet_NaN();
        res.intercept = std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

std::vector<double> deltas_for_characteristic(double q_lo, double q_hi, int count, int depth) {
    if (!(q_lo > 1.0) || !(q_hi >= q_lo) || count < 1) throw ConfigError("need 1 < q_lo <= q_hi and count >= 1");
    auto q_of = [&](double delta) { return a2_characteristic(power_weight_family(delta, depth)); };
    const double floor_delta = -1.0 + 1e-9;
    if (q_of(floor_delta) < q_hi) throw ConfigError("characteristic range not reachable at this depth");
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        const double target = count == 1 ? q_lo : q_lo * std::pow(q_hi / q_lo, static_cast<double>(i) / (count - 1));
        double lo = floor_delta, hi = 0.0;  // q_of decreases from lo to hi
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (q_of(mid) > target ? lo : hi) = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    return out;
}

std::string sharpness_csv(const SharpnessResult& result) {
    std::string out = "delta,depth,Q2,worst_ratio\n";
    char buf[160];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof buf, "%.12g,%d,%.12g,%.12g\n", r.delta, r.depth, r.Q2, r.worst_ratio);
        out += buf;
    }
    return out;
}

std::string to_text(const DyadicMartingale& x) {
    std::string out = "depth " + std::to_string(x.depth()) + " dim " + std::to_string(x.dim()) + "\n";
    char buf[64];
    for (std::size_t i = 1; i < x.node_count(); ++i) {
        for (int j = 0; j < x.dim(); ++j) {
            std::snprintf(buf, sizeof buf, j == 0 ? "%.17g" : " %.17g", x.value(i)[j]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

DyadicMartingale parse_martingale(const std::string& text) {
    std::istringstream in(text);
    std::string w1, w2;
    long long depth = -1, dim = -1;
    if (!(in >> w1 >> depth >> w2 >> dim) || w1 != "depth" || w2 != "dim") {
        throw InvalidInput("martingale file must start with 'depth n dim d'");
    }
    if (depth < 0 || depth > kMaxMartingaleDepth || dim < 1 || dim > 4096) {
        throw InvalidInput("martingale depth or dimension out of range");
    }
    const std::size_t nodes = (std::size_t{2} << depth) - 1;
    std::vector<double> vals;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw InvalidInput("malformed martingale value '" + tok + "'");
        }
        if (used != tok.size()) throw InvalidInput("malformed martingale value '" + tok + "'");
        vals.push_back(v);
    }
    if (vals.size() != nodes * dim) throw InvalidInput("martingale file has the wrong number of values");
    const std::size_t first = (std::size_t{1} << depth) - 1;
    const DyadicMartingale m = DyadicMartingale::from_leaves(
        static_cast<int>(depth), static_cast<int>(dim), std::vector<double>(vals.begin() + first * dim, vals.end()));
    for (std::size_t i = 1; i <= first; ++i) {
        for (long long j = 0; j < dim; ++j) {
            const double given = vals[(i - 1) * dim + j], rebuilt = m.value(i)[j];
            if (std::abs(given - rebuilt) > 1e-9 * (1.0 + std::abs(rebuilt))) {
                throw InvalidInput("node " + std::to_string(i) + " is not the average of its children");
            }
        }
    }
    return m;
}

}  // namespace wdsub

#include "wdsub/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wdsub/detail/format.hpp"
#include "wdsub/errors.hpp"
#include "wdsub/parallel.hpp"

namespace wdsub {
namespace {

using detail::fmt;
using detail::fmt_bool;

enum Stream : std::uint64_t { kSimulation = 31, kTelescope = 32 };

std::vector<double> random_signs(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<double> s(n);
    for (double& v : s) v = coin(rng) ? 1.0 : -1.0;
    return s;
}

}  // namespace

void SimulationSpec::validate() const {
    if (depth < 0 || depth > kMaxMartingaleDepth) throw ConfigError("depth must lie in [0, 20]");
    if (dim < 1) throw ConfigError("dim must be at least 1");
    if (delta && !(*delta > -1.0)) throw ConfigError("delta must exceed -1");
    if (weight && weight->depth() != depth) throw ConfigError("weight depth differs from --depth");
    if (!(C_target > 0.0)) throw ConfigError("C_target must be positive");
}

SimulationReport run_simulation(const SimulationSpec& spec, const BellmanConfig& cfg) {
    spec.validate();
    cfg.validate();
    const std::optional<WeightTree> fixed =
        spec.weight ? spec.weight
                    : (spec.delta ? std::optional<WeightTree>(power_weight_family(*spec.delta, spec.depth))
                                  : std::nullopt);
    SimulationReport rep;
    rep.rows.resize(spec.instances);
    parallel_for(spec.instances, spec.jobs, [&](std::size_t i) {
        auto rng = substream(spec.seed, kSimulation, i);
        const WeightTree w = fixed ? *fixed : random_truncated_weight(spec.depth, cfg.Q, cfg.eps, rng);
        const DyadicMartingale x = random_martingale(spec.depth, spec.dim, rng);
        const bool rotation = i % 2 == 1;
        const DyadicMartingale y = rotation ? rotate_increments(x, rng) : transform(x, random_signs(x.leaf_count(), rng));
        const DyadicMartingale z = random_martingale(spec.depth, spec.dim, rng);
        const BilinearResult b = verify_bilinear_estimate(x, y, z, w, spec.C_target, cfg);
        const MainTheoremResult m = verify_main_theorem(x, y, w, spec.C_target, splitmix64(spec.seed ^ i));
        SimulationRow& row = rep.rows[i];
        row.instance = i;
        row.kind = rotation ? "rotation" : "multiplier";
        row.Q2 = m.Q2;
        row.bilinear_ratio = b.ratio;
        row.main_ratio = m.ratio;
        row.duality_gap = m.duality_gap;
        row.pass = b.pass && m.pass && b.within_bellman_bound && m.duality_gap <= 1e-8;
    });
    double worst = -1.0;
    for (const auto& row : rep.rows) {
        rep.max_bilinear_ratio = std::max(rep.max_bilinear_ratio, row.bilinear_ratio);
        rep.max_main_ratio = std::max(rep.max_main_ratio, row.main_ratio);
        rep.max_duality_gap = std::max(rep.max_duality_gap, row.duality_gap);
        const double badness = row.pass ? std::max(row.bilinear_ratio, row.main_ratio)
                                        : std::numeric_limits<double>::infinity();
        if (badness > worst) {
            worst = badness;
            rep.worst_instance = row.instance;
        }
        rep.pass = rep.pass && row.pass;
    }
    return rep;
}

std::string simulation_csv(const SimulationReport& report) {
    std::ostringstream os;
    os << "instance,kind,Q2,bilinear_ratio,main_ratio,duality_gap,pass\n";
    for (const auto& r : report.rows) {
        os << r.instance << "," << r.kind << "," << fmt(r.Q2) << "," << fmt(r.bilinear_ratio) << ","
           << fmt(r.main_ratio) << "," << fmt(r.duality_gap) << "," << fmt_bool(r.pass) << "\n";
    }
    return os.str();
}

std::string to_structured_text(const SimulationReport& report, const SimulationSpec& spec) {
    std::ostringstream os;
    os << "simulation\n";
    os << "  pass: " << fmt_bool(report.pass) << "\n";
    os << "  depth: " << spec.depth << "\n";
    os << "  dim: " << spec.dim << "\n";
    os << "  instances: " << spec.instances << "\n";
    os << "  seed: " << spec.seed << "\n";
    os << "  weight: " << (spec.weight ? "file" : spec.delta ? "power " + fmt(*spec.delta) : std::string("random"))
       << "\n";
    os << "  C_target: " << fmt(spec.C_target) << "\n";
    os << "  max_bilinear_ratio: " << fmt(report.max_bilinear_ratio) << "\n";
    os << "  max_main_ratio: " << fmt(report.max_main_ratio) << "\n";
    os << "  max_duality_gap: " << fmt(report.max_duality_gap) << "\n";
    os << "  worst_instance: " << report.worst_instance << "\n";
    for (const auto& r : report.rows) {
        os << "  instance " << r.instance << "\n";
        os << "    kind: " << r.kind << "\n";
        os << "    Q2: " << fmt(r.Q2) << "\n";
        os << "    bilinear_ratio: " << fmt(r.bilinear_ratio) << "\n";
        os << "    main_ratio: " << fmt(r.main_ratio) << "\n";
        os << "    pass: " << fmt_bool(r.pass) << "\n";
    }
    return os.str();
}

void TelescopeSpec::validate() const {
    if (depth < 0 || depth > kMaxMartingaleDepth) throw ConfigError("depth must lie in [0, 20]");
    if (dim < 1) throw ConfigError("dim must be at least 1");
    if (!(a >= 0.0)) throw ConfigError("anchor a must be nonnegative");
    if (weight && weight->depth() != depth) throw ConfigError("weight depth differs from --depth");
}

TelescopeReport run_telescope_batch(const TelescopeSpec& spec, const BellmanConfig& cfg) {
    spec.validate();
    cfg.validate();
    TelescopeReport rep;
    rep.rows.resize(spec.instances);
    std::vector<std::vector<AnchorSensitivity>> sens(spec.instances);
    TelescopeOptions opt;
    opt.a = spec.a;
    parallel_for(spec.instances, spec.jobs, [&](std::size_t i) {
        auto rng = substream(spec.seed, kTelescope, i);
        const WeightTree w = spec.weight ? *spec.weight : random_truncated_weight(spec.depth, cfg.Q, cfg.eps, rng);
        const DyadicMartingale x = random_martingale(spec.depth, spec.dim, rng);
        const bool rotation = i % 2 == 1;
        const DyadicMartingale z = rotation ? rotate_increments(x, rng) : random_martingale(spec.depth, spec.dim, rng);
        const TelescopeResult t = bellman_telescope(x, z, w, cfg, opt);
        TelescopeRow& row = rep.rows[i];
        row.instance = i;
        row.kind = rotation ? "rotation" : "independent";
        row.Q2 = a2_characteristic(w);
        row.lhs = t.lhs;
        row.sum_increments = t.sum_increments;
        row.bellman_bound = t.bellman_bound;
        row.min_margin = t.min_margin;
        row.max_linear_residual = t.max_linear_residual;
        row.pass = t.pass;
        if (i == 0) sens[0] = anchor_sensitivity(x, z, w, cfg);
    });
    if (!sens.empty()) rep.sensitivity = sens[0];
    rep.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& row : rep.rows) {
        rep.max_linear_residual = std::max(rep.max_linear_residual, row.max_linear_residual);
        if (row.min_margin < rep.min_margin) {
            rep.min_margin = row.min_margin;
            rep.worst_instance = row.instance;
        }
        rep.pass = rep.pass && row.pass;
    }
    if (rep.rows.empty()) rep.min_margin = 0.0;
    for (const auto& row : rep.rows) {
        if (!row.pass) {
            rep.worst_instance = row.instance;
            break;
        }
    }
    return rep;
}

std::string telescope_csv(const TelescopeReport& report) {
    std::ostringstream os;
    os << "instance,kind,Q2,lhs,sum_increments,bellman_bound,min_margin,max_linear_residual,pass\n";
    for (const auto& r : report.rows) {
        os << r.instance << "," << r.kind << "," << fmt(r.Q2) << "," << fmt(r.lhs) << "," << fmt(r.sum_increments)
           << "," << fmt(r.bellman_bound) << "," << fmt(r.min_margin) << "," << fmt(r.max_linear_residual) << ","
           << fmt_bool(r.pass) << "\n";
    }
    return os.str();
}

std::string to_structured_text(const TelescopeReport& report, const TelescopeSpec& spec) {
    std::ostringstream os;
    os << "telescope\n";
    os << "  pass: " << fmt_bool(report.pass) << "\n";
    os << "  depth: " << spec.depth << "\n";
    os << "  dim: " << spec.dim << "\n";
    os << "  instances: " << spec.instances << "\n";
    os << "  seed: " << spec.seed << "\n";
    os << "  min_margin: " << fmt(report.min_margin) << "\n";
    os << "  max_linear_residual: " << fmt(report.max_linear_residual) << "\n";
    os << "  worst_instance: " << report.worst_instance << "\n";
    for (const auto& s : report.sensitivity) {
        os << "  anchor " << fmt(s.a) << "\n";
        os << "    lhs: " << fmt(s.lhs) << "\n";
        os << "    bellman_bound: " << fmt(s.bellman_bound) << "\n";
        os << "    min_margin: " << fmt(s.min_margin) << "\n";
        os << "    pass: " << fmt_bool(s.pass) << "\n";
    }
    for (const auto& r : report.rows) {
        os << "  instance " << r.instance << "\n";
        os << "    kind: " << r.kind << "\n";
        os << "    Q2: " << fmt(r.Q2) << "\n";
        os << "    lhs: " << fmt(r.lhs) << "\n";
        os << "    sum_increments: " << fmt(r.sum_increments) << "\n";
        os << "    bellman_bound: " << fmt(r.bellman_bound) << "\n";
        os << "    min_margin: " << fmt(r.min_margin) << "\n";
        os << "    pass: " << fmt_bool(r.pass) << "\n";
    }
    return os.str();
}

}  // namespace wdsub

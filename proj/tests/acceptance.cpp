// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [path to the wdsub executable]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wdsub/bellman.hpp"
#include "wdsub/certify.hpp"
#include "wdsub/experiments.hpp"
#include "wdsub/martingale.hpp"
#include "wdsub/mollify.hpp"
#include "wdsub/weights.hpp"

using namespace wdsub;

namespace {

// Tolerances and sizes.
constexpr std::array<double, 3> kQs{2.0, 16.0, 256.0};
constexpr double kEps = 0.1;
constexpr double kEll = 0.05;
constexpr int kDim = 2;
constexpr std::size_t kCertSamples = 10000;
constexpr double kCertSecondsMax = 60.0;
constexpr double kMarginTol = 1e-8;
constexpr std::size_t kH4Points = 10000;
constexpr double kH4RelTol = 1e-6;
constexpr double kTauLo = 0.1;
constexpr double kTauHi = 10.0;
constexpr std::size_t kCutPoints = 1000;
constexpr double kCutRate = 0.9;
constexpr std::size_t kWeightsPerDepth = 1000;
constexpr double kQ2RelTol = 1e-12;
constexpr int kTelescopeDepth = 8;
constexpr double kTelescopeQ = 16.0;
constexpr std::size_t kTelescopeInstances = 100;
constexpr double kLinearTol = 1e-10;
constexpr std::array<double, 3> kMainDeltas{-0.5, 0.0, 1.0};
constexpr int kMainDepth = 10;
constexpr std::size_t kMainInstances = 100;
constexpr double kCTarget = kDefaultCTarget;
constexpr double kDualityTol = 1e-8;
constexpr int kSharpDepth = 12;
constexpr double kSharpQ2Lo = 2.0;
constexpr double kSharpQ2Hi = 100.0;
constexpr int kSharpRows = 8;
constexpr double kSharpSlopeMin = 0.8;

struct Outcome {
    bool pass = true;
    std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void detail(const std::string& line) { std::printf("    %s\n", line.c_str()); }

BellmanConfig config_for(double Q) {
    BellmanConfig cfg;
    cfg.Q = Q;
    cfg.eps = kEps;
    cfg.ell = kEll;
    cfg.dim = kDim;
    return cfg;
}

SampleSpec sample_spec(double Q, std::size_t count) {
    SampleSpec spec;
    spec.count = count;
    spec.seed = 1;
    spec.Q = Q;
    spec.eps = kEps;
    spec.ell = kEll;
    spec.dim = kDim;
    return spec;
}

// Q2 by enumerating every dyadic interval of the leaves.
double q2_enumerated(const std::vector<double>& leaves) {
    double best = 1.0;
    for (std::size_t len = leaves.size(); len >= 1; len /= 2) {
        for (std::size_t start = 0; start < leaves.size(); start += len) {
            double sw = 0.0, su = 0.0;
            for (std::size_t k = start; k < start + len; ++k) {
                sw += leaves[k];
                su += 1.0 / leaves[k];
            }
            best = std::max(best, (sw / len) * (su / len));
        }
    }
    return best;
}

std::vector<CertReport> g_cert;

Outcome certification() {
    Outcome out;
    for (double Q : kQs) {
        CertOptions opt;
        opt.cut_points = 0;
        const auto t0 = std::chrono::steady_clock::now();
        CertReport rep = run_certification(config_for(Q), sample_spec(Q, kCertSamples), opt);
        const double secs = seconds_since(t0);
        bool ok = secs <= kCertSecondsMax;
        for (const auto& c : rep.checks) {
            if (c.name == "size" || c.name == "hessian_lower" || c.name == "one_leg" || c.name == "partial_xx" ||
                c.name == "partial_yy") {
                ok = ok && c.pass;
                detail("Q=" + num(Q) + " " + c.name + " margin " + num(c.min_margin) + (c.pass ? "" : " FAILED"));
            }
        }
        detail("Q=" + num(Q) + " runtime " + num(secs) + " s, all checks " + (rep.pass ? "pass" : "fail"));
        out.pass = out.pass && ok && rep.pass;
        g_cert.push_back(std::move(rep));
    }
    out.summary = "certification at Q in {2, 16, 256}, 10^4 samples each";
    return out;
}

Outcome h4_oracle() {
    Outcome out;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::array<std::size_t, 4> counts{};
    double worst = 0.0;
    for (std::size_t i = 0; i < kH4Points; ++i) {
        const double Q = kQs[i % kQs.size()];
        const double t = std::exp(U(rng) * std::log(Q));
        const double r = std::exp(std::log(kEps) + U(rng) * (-2.0 * std::log(kEps)));
        const double s = t / r;
        const double K = eval_K(r, s, Q);
        const double nx = std::exp(std::log(1e-3) + U(rng) * std::log(1e6));
        const double ny = std::exp(std::log(1e-3) + U(rng) * std::log(1e6));
        const double h = eval_H4(nx, ny, r, s, K);
        const double b = wdsub::testing::h4_brute(nx, ny, r, s, K);
        worst = std::max(worst, std::abs(h - b) / std::max(std::abs(b), 1e-300));
        ++counts[static_cast<std::size_t>(classify_region(nx, ny, r, s, K))];
    }
    detail("points R1 " + std::to_string(counts[0]) + ", R2 " + std::to_string(counts[1]) + ", R3 " +
           std::to_string(counts[2]) + ", cut " + std::to_string(counts[3]));
    detail("max relative error " + num(worst));
    out.pass = worst <= kH4RelTol && counts[0] > 0 && counts[1] > 0 && counts[2] > 0;
    out.summary = "closed-form H4 matches golden-section supremum on 10^4 points";
    return out;
}

Outcome tau_bounds() {
    Outcome out;
    for (const auto& rep : g_cert) {
        const double Q = rep.cfg.Q;
        const double lo = kTauLo * kEps / Q;
        const double hi = kTauHi * Q / kEps;
        const bool ok = rep.tau.samples == kCertSamples && rep.tau.failures == 0 && rep.tau.min >= lo &&
                        rep.tau.max <= hi;
        detail("Q=" + num(Q) + " tau in [" + num(rep.tau.min) + ", " + num(rep.tau.max) + "], bounds [" + num(lo) +
               ", " + num(hi) + "], failures " + std::to_string(rep.tau.failures) + ", scaling exponent " +
               num(rep.tau.scaling_exponent));
        out.pass = out.pass && ok;
    }
    out.summary = "tau extracted at every sample and inside [eps/(10Q), 10Q/eps]";
    return out;
}

Outcome cuts() {
    Outcome out;
    for (double Q : kQs) {
        const CutReport rep = check_c1_across_cuts(config_for(Q), kCutPoints, 1);
        for (const auto& f : rep.families) {
            std::string levels;
            for (const auto& l : f.levels) levels += " " + num(l.max_mismatch);
            detail("Q=" + num(Q) + " " + f.name + " rate " + num(f.rate) + ", mismatch" + levels);
            out.pass = out.pass && f.pass && f.rate >= kCutRate;
        }
        out.pass = out.pass && rep.pass;
    }
    out.summary = "B4 gradient mismatch decays at least linearly across both cuts";
    return out;
}

Outcome truncation() {
    Outcome out;
    std::size_t violations = 0, oracle_mismatch = 0, total = 0;
    for (int depth = 2; depth <= 10; ++depth) {
        std::mt19937_64 rng(1000 + depth);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (std::size_t i = 0; i < kWeightsPerDepth; ++i) {
            const WeightTree w = random_weight(depth, 0.2 + 0.8 * U(rng), rng);
            const auto [lo, hi] = std::minmax_element(w.leaves().begin(), w.leaves().end());
            const double a_above = std::exp(std::log(*lo) + U(rng) * (std::log(*hi) - std::log(*lo)));
            const double span = std::max({*hi, 1.0 / *lo, 1.0});
            const double a_two = std::exp(U(rng) * std::log(span));
            const double q = q2_enumerated(w.leaves());
            for (const WeightTree& t : {truncate_above(w, a_above), truncate_two_sided(w, a_two)}) {
                const double qt = q2_enumerated(t.leaves());
                if (qt > q * (1.0 + kQ2RelTol)) ++violations;
                if (std::abs(a2_characteristic(t) - qt) > kQ2RelTol * qt) ++oracle_mismatch;
                ++total;
            }
            if (std::abs(a2_characteristic(w) - q) > kQ2RelTol * q) ++oracle_mismatch;
        }
    }
    detail(std::to_string(total) + " truncations, violations " + std::to_string(violations) +
           ", characteristic mismatches vs enumeration " + std::to_string(oracle_mismatch));
    out.pass = violations == 0 && oracle_mismatch == 0;
    out.summary = "truncation never increases Q2, depths 2..10, 10^3 weights each";
    return out;
}

TelescopeReport g_telescope;

Outcome telescope() {
    Outcome out;
    TelescopeSpec spec;
    spec.depth = kTelescopeDepth;
    spec.dim = kDim;
    spec.instances = kTelescopeInstances;
    spec.seed = 1;
    g_telescope = run_telescope_batch(spec, config_for(kTelescopeQ));
    std::size_t rotations = 0, failed = 0, aggregate = 0;
    for (const auto& r : g_telescope.rows) {
        if (r.kind == "rotation") ++rotations;
        if (!r.pass) ++failed;
        if (!(r.lhs <= r.sum_increments + kMarginTol * std::max(1.0, r.lhs) && r.sum_increments <= r.bellman_bound))
            ++aggregate;
    }
    detail("instances " + std::to_string(g_telescope.rows.size()) + " (rotation " + std::to_string(rotations) +
           "), failed " + std::to_string(failed) + ", aggregate violations " + std::to_string(aggregate));
    detail("min per-step margin " + num(g_telescope.min_margin) + ", max linear residual " +
           num(g_telescope.max_linear_residual));
    out.pass = g_telescope.pass && failed == 0 && aggregate == 0 && rotations > 0 &&
               g_telescope.min_margin >= -kMarginTol && g_telescope.max_linear_residual <= kLinearTol;
    out.summary = "telescope on 100 instances at depth 8, Q = 16";
    return out;
}

void report_mollification() {
    const BellmanConfig cfg = config_for(kTelescopeQ);
    const MollifiedBellman mb(cfg);
    std::mt19937_64 rng(77);
    double worst_value = 0.0;
    for (const StatePoint& v : sample_domain(sample_spec(kTelescopeQ, 100))) {
        const double b = bellman_value(v, cfg);
        worst_value = std::max(worst_value, std::abs(mb.value(v) - b) / b);
    }
    detail("mollification: max |B_l - B|/B on 100 points " + num(worst_value) + ", one-leg constant 1/Q vs 2/Q");
    for (int i = 0; i < 3; ++i) {
        const WeightTree w = random_truncated_weight(3, cfg.Q, cfg.eps, rng);
        const DyadicMartingale x = random_martingale(3, kDim, rng);
        const DyadicMartingale z = rotate_increments(x, rng);
        const TelescopeResult raw = bellman_telescope(x, z, w, cfg);
        TelescopeOptions opt;
        opt.mollified = &mb;
        const TelescopeResult mol = bellman_telescope(x, z, w, cfg, opt);
        detail("mollification: depth-3 telescope " + std::to_string(i) + " lhs " + num(raw.lhs) + " -> " +
               num(mol.lhs) + ", bound " + num(raw.bellman_bound) + " -> " + num(mol.bellman_bound) +
               ", min margin " + num(raw.min_margin) + " -> " + num(mol.min_margin) + (mol.pass ? "" : " FAILED"));
    }
}

Outcome main_estimate() {
    Outcome out;
    double calibrated = 0.0;
    for (double delta : kMainDeltas) {
        SimulationSpec spec;
        spec.depth = kMainDepth;
        spec.dim = kDim;
        spec.instances = kMainInstances;
        spec.seed = 1;
        spec.delta = delta;
        spec.C_target = kCTarget;
        const SimulationReport rep = run_simulation(spec, config_for(kTelescopeQ));
        std::size_t failed = 0;
        for (const auto& r : rep.rows) failed += r.pass ? 0 : 1;
        calibrated = std::max(calibrated, rep.max_main_ratio);
        detail("delta=" + num(delta) + " Q2 " + num(rep.rows.empty() ? 1.0 : rep.rows.front().Q2) +
               ", max main ratio " + num(rep.max_main_ratio) + ", max bilinear ratio " +
               num(rep.max_bilinear_ratio) + ", max duality gap " + num(rep.max_duality_gap) + ", failed " +
               std::to_string(failed));
        out.pass = out.pass && rep.pass && rep.max_main_ratio <= kCTarget && rep.max_duality_gap <= kDualityTol;
    }
    detail("C_target " + num(kCTarget) + ", smallest constant covering all instances " + num(calibrated));
    report_mollification();
    for (const auto& s : g_telescope.sensitivity) {
        detail("anchor a=" + num(s.a) + " lhs " + num(s.lhs) + ", bound " + num(s.bellman_bound) + ", min margin " +
               num(s.min_margin) + (s.pass ? "" : " FAILED"));
    }
    out.summary = "main estimate with C_target = 10 on 100 instances per delta in {-0.5, 0, 1}";
    return out;
}

Outcome sharpness() {
    Outcome out;
    const std::vector<double> grid = deltas_for_characteristic(kSharpQ2Lo, kSharpQ2Hi, kSharpRows, kSharpDepth);
    const SharpnessResult res = sharpness_experiment(grid, kSharpDepth);
    for (const auto& r : res.rows) {
        detail("delta " + num(r.delta) + " Q2 " + num(r.Q2) + " worst ratio " + num(r.worst_ratio));
    }
    detail("slope " + num(res.slope) + " (required >= " + num(kSharpSlopeMin) + "), max ratio/Q2 " +
           num(res.max_ratio_over_Q2));
    out.pass = std::isfinite(res.slope) && res.slope >= kSharpSlopeMin && res.max_ratio_over_Q2 <= kCTarget;
    out.summary = "sharpness slope over Q2 in [2, 100] at depth 12";
    return out;
}

std::string capture(const std::string& command) {
    std::string text;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return "<popen failed>";
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) text.append(buf.data(), n);
    const int status = pclose(pipe);
    return text + "\n<status " + std::to_string(status) + ">";
}

Outcome determinism(const std::string& cli) {
    Outcome out;
    std::size_t compared = 0, differing = 0;
    auto compare = [&](const std::string& what, const std::function<std::string(int)>& run) {
        const std::string a = run(1);
        const std::string b = run(4);
        const std::string c = run(1);
        ++compared;
        if (a != b || a != c) {
            ++differing;
            detail(what + " differs across repeats or jobs");
        }
    };
    compare("certify", [](int jobs) {
        CertOptions opt;
        opt.jobs = jobs;
        opt.cut_points = 50;
        return to_structured_text(run_certification(config_for(16.0), sample_spec(16.0, 300), opt));
    });
    compare("tau-sweep", [](int jobs) { return tau_sweep_csv(tau_sweep(config_for(16.0), sample_spec(16.0, 200), jobs)); });
    compare("simulate", [](int jobs) {
        SimulationSpec spec;
        spec.depth = 6;
        spec.instances = 20;
        spec.jobs = jobs;
        return simulation_csv(run_simulation(spec, config_for(16.0)));
    });
    compare("telescope", [](int jobs) {
        TelescopeSpec spec;
        spec.depth = 5;
        spec.instances = 10;
        spec.jobs = jobs;
        const TelescopeReport rep = run_telescope_batch(spec, config_for(16.0));
        return to_structured_text(rep, spec);
    });
    compare("sharpness", [](int jobs) {
        SharpnessOptions opt;
        opt.jobs = jobs;
        opt.restarts = 8;
        return sharpness_csv(sharpness_experiment({-0.8, -0.5, -0.2}, 8, opt));
    });
    if (!cli.empty()) {
        const std::vector<std::string> commands{
            "certify --Q 16 --samples 500 --seed 3",
            "tau-sweep --samples 200 --seed 3",
            "simulate --depth 6 --samples 20 --seed 3 --format csv",
            "telescope --depth 5 --samples 10 --seed 3 --format csv",
            "sharpness --delta-grid -0.8:-0.2:3 --depth 8 --restarts 8 --seed 3",
        };
        for (const auto& cmd : commands) {
            compare("cli " + cmd, [&](int jobs) {
                return capture("'" + cli + "' " + cmd + " --jobs " + std::to_string(jobs) + " 2>&1");
            });
        }
    }
    detail(std::to_string(compared) + " outputs compared across repeats and --jobs 1/4, " +
           std::to_string(differing) + " differ" + (cli.empty() ? " (command-line tool not given)" : ""));
    out.pass = differing == 0;
    out.summary = "byte-identical outputs across repeats and worker counts";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, certification}, {2, h4_oracle},     {3, tau_bounds}, {4, cuts},
        {5, truncation},    {6, telescope},     {7, main_estimate}, {8, sharpness},
        {9, [&] { return determinism(cli); }},
    };
    int failures = 0;
    for (const auto& [id, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, o.summary.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

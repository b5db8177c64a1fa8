// Command-line entry point: certify, tau-sweep, simulate, sharpness, truncate, telescope.
//
// Exit codes: 0 success, 1 a checked property failed, 2 bad flags or input.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wdsub/certify.hpp"
#include "wdsub/detail/format.hpp"
#include "wdsub/errors.hpp"
#include "wdsub/experiments.hpp"
#include "wdsub/martingale.hpp"
#include "wdsub/weights.hpp"

namespace {

using namespace wdsub;

struct Common {
    double Q = 16.0;
    double eps = 0.1;
    double ell = 0.05;
    int dim = 2;
    std::uint64_t seed = 0;
    std::string out = "-";
    std::string format = "text";
    int jobs = 0;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + path);
    f << text;
}

BellmanConfig bellman_config(const Common& c) {
    BellmanConfig cfg;
    cfg.Q = c.Q;
    cfg.eps = c.eps;
    cfg.ell = c.ell;
    cfg.dim = c.dim;
    cfg.validate();
    return cfg;
}

std::vector<double> parse_grid(const std::string& text) {
    // a:b:n, n ≥ 1 points from a to b inclusive
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw UsageError("--delta-grid expects a:b:n");
    double a = 0, b = 0;
    long n = 0;
    try {
        std::size_t u1 = 0, u2 = 0, u3 = 0;
        a = std::stod(parts[0], &u1);
        b = std::stod(parts[1], &u2);
        n = std::stol(parts[2], &u3);
        if (u1 != parts[0].size() || u2 != parts[1].size() || u3 != parts[2].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw UsageError("--delta-grid expects a:b:n");
    }
    if (n < 1 || n > 1000) throw UsageError("--delta-grid needs 1 <= n <= 1000");
    std::vector<double> grid;
    for (long i = 0; i < n; ++i) grid.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1));
    return grid;
}

void add_common(CLI::App* app, Common& c, bool randomized, bool with_format = true) {
    app->add_option("--Q", c.Q, "Upper bound for rs and for the A2 characteristic")->capture_default_str();
    app->add_option("--eps", c.eps, "Box [eps, 1/eps] for r and s")->capture_default_str();
    app->add_option("--ell", c.ell, "Lower bound for |x| and |y|")->capture_default_str();
    app->add_option("--dim", c.dim, "Dimension of x and y")->capture_default_str();
    if (randomized) app->add_option("--seed", c.seed, "Random seed")->required();
    app->add_option("--out", c.out, "Output path, - for stdout")->capture_default_str();
    if (with_format) {
        app->add_option("--format", c.format, "Output format")
            ->check(CLI::IsMember({"csv", "text"}))
            ->capture_default_str();
    }
    app->add_option("--jobs", c.jobs, "Worker threads, 0 for all cores")->capture_default_str();
}

int run_certify(const Common& c, std::size_t samples) {
    SampleSpec spec;
    spec.count = samples;
    spec.seed = c.seed;
    spec.Q = c.Q;
    spec.eps = c.eps;
    spec.ell = c.ell;
    spec.dim = c.dim;
    spec.validate();
    CertOptions opt;
    opt.jobs = c.jobs;
    const CertReport rep = run_certification(spec.bellman_config(), spec, opt);
    emit(c.out, c.format == "csv" ? to_csv(rep) : to_structured_text(rep));
    if (!rep.pass) {
        for (const auto& ch : rep.checks) {
            if (!ch.pass) std::cerr << "check failed: " << ch.name << "\n";
        }
    }
    return rep.pass ? 0 : 1;
}

int run_tau_sweep(const Common& c, std::size_t samples) {
    SampleSpec spec;
    spec.count = samples;
    spec.seed = c.seed;
    spec.Q = c.Q;
    spec.eps = c.eps;
    spec.ell = c.ell;
    spec.dim = c.dim;
    spec.validate();
    const auto rows = tau_sweep(spec.bellman_config(), spec, c.jobs);
    emit(c.out, tau_sweep_csv(rows));
    for (const auto& r : rows) {
        if (!r.success) {
            std::cerr << "tau extraction failed at sample " << r.id << "\n";
            return 1;
        }
    }
    return 0;
}

std::optional<WeightTree> load_weight(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return read_weight_file(path);
}

int run_simulate(const Common& c, int depth, std::size_t samples, std::optional<double> delta,
                 const std::string& weight_file) {
    SimulationSpec spec;
    spec.depth = depth;
    spec.dim = c.dim;
    spec.instances = samples;
    spec.seed = c.seed;
    spec.delta = delta;
    spec.weight = load_weight(weight_file);
    spec.jobs = c.jobs;
    const SimulationReport rep = run_simulation(spec, bellman_config(c));
    emit(c.out, c.format == "csv" ? simulation_csv(rep) : to_structured_text(rep, spec));
    if (!rep.pass) {
        const auto& r = rep.rows[rep.worst_instance];
        std::cerr << "worst instance " << r.instance << " (" << r.kind << "): Q2 " << r.Q2 << ", bilinear ratio "
                  << r.bilinear_ratio << ", main ratio " << r.main_ratio << ", duality gap " << r.duality_gap << "\n";
        return 1;
    }
    return 0;
}

int run_sharpness(const Common& c, int depth, const std::vector<double>& grid, int restarts) {
    SharpnessOptions opt;
    opt.seed = c.seed;
    opt.jobs = c.jobs;
    opt.restarts = restarts;
    const SharpnessResult res = sharpness_experiment(grid, depth, opt);
    if (c.format == "csv") {
        emit(c.out, sharpness_csv(res));
        std::cerr << "slope: " << res.slope << "\n";
    } else {
        std::ostringstream os;
        const auto g = [](double v) { return detail::fmt(v); };
        os << "sharpness\n";
        os << "  depth: " << depth << "\n";
        os << "  restarts: " << restarts << "\n";
        os << "  seed: " << c.seed << "\n";
        os << "  slope: " << g(res.slope) << "\n";
        os << "  intercept: " << g(res.intercept) << "\n";
        os << "  max_ratio_over_Q2: " << g(res.max_ratio_over_Q2) << "\n";
        for (const auto& r : res.rows) {
            os << "  row\n";
            os << "    delta: " << g(r.delta) << "\n";
            os << "    Q2: " << g(r.Q2) << "\n";
            os << "    worst_ratio: " << g(r.worst_ratio) << "\n";
        }
        emit(c.out, os.str());
    }
    return 0;
}

int run_truncate(const std::string& weight_file, double a, bool two_sided, const std::string& out) {
    const WeightTree w = read_weight_file(weight_file);
    const WeightTree t = two_sided ? truncate_two_sided(w, a) : truncate_above(w, a);
    const double before = a2_characteristic(w), after = a2_characteristic(t);
    if (!out.empty() && out != "-") write_weight_file(t, out);
    char buf[128];
    std::snprintf(buf, sizeof buf, "Q2_before: %.12g\nQ2_after: %.12g\n", before, after);
    std::cout << buf << std::flush;
    if (after > before) {
        std::cerr << "truncation increased the characteristic\n";
        return 1;
    }
    return 0;
}

int run_telescope(const Common& c, int depth, std::size_t samples, double a, const std::string& weight_file) {
    TelescopeSpec spec;
    spec.depth = depth;
    spec.dim = c.dim;
    spec.instances = samples;
    spec.seed = c.seed;
    spec.a = a;
    spec.weight = load_weight(weight_file);
    spec.jobs = c.jobs;
    const TelescopeReport rep = run_telescope_batch(spec, bellman_config(c));
    emit(c.out, c.format == "csv" ? telescope_csv(rep) : to_structured_text(rep, spec));
    if (!rep.pass) {
        const auto& r = rep.rows[rep.worst_instance];
        std::cerr << "worst instance " << r.instance << " (" << r.kind << "): min margin " << r.min_margin
                  << ", linear residual " << r.max_linear_residual << ", lhs " << r.lhs << ", bound "
                  << r.bellman_bound << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bellman function certification and dyadic martingale experiments"};
    app.require_subcommand(1);

    Common cert, sweep, sim, sharp, tele;
    std::size_t cert_samples = 10000, sweep_samples = 1000, sim_samples = 100, tele_samples = 10;
    int sim_depth = 10, sharp_depth = 12, tele_depth = 8, restarts = 32;
    std::optional<double> sim_delta;
    std::string sim_weight, tele_weight, trunc_weight, trunc_out = "-", grid_text;
    std::optional<double> sharp_delta;
    double trunc_a = 0.0, tele_a = 0.0;
    bool two_sided = false;

    auto* c_cert = app.add_subcommand("certify", "Sampled certification of the Bellman function");
    add_common(c_cert, cert, true);
    c_cert->add_option("--samples", cert_samples, "Sample points")->capture_default_str();

    auto* c_sweep = app.add_subcommand("tau-sweep", "CSV of the ellipse parameter at sampled points");
    add_common(c_sweep, sweep, true, false);
    c_sweep->add_option("--samples", sweep_samples, "Sample points")->capture_default_str();

    auto* c_sim = app.add_subcommand("simulate", "Bilinear and main estimates on random subordinate pairs");
    add_common(c_sim, sim, true);
    c_sim->add_option("--depth", sim_depth, "Tree depth")->capture_default_str();
    c_sim->add_option("--samples", sim_samples, "Instances")->capture_default_str();
    c_sim->add_option("--delta", sim_delta, "Power weight exponent");
    c_sim->add_option("--weight-file", sim_weight, "Weight file");

    auto* c_sharp = app.add_subcommand("sharpness", "Adversarial transform norms for power weights");
    sharp.format = "csv";
    add_common(c_sharp, sharp, true);
    c_sharp->add_option("--depth", sharp_depth, "Tree depth")->capture_default_str();
    auto* grid_opt = c_sharp->add_option("--delta-grid", grid_text, "a:b:n");
    c_sharp->add_option("--delta", sharp_delta, "Single exponent")->excludes(grid_opt);
    c_sharp->add_option("--restarts", restarts, "Random restarts")->capture_default_str()->check(CLI::Range(1, 4096));

    auto* c_trunc = app.add_subcommand("truncate", "Truncate a weight file and report Q2 before and after");
    c_trunc->add_option("--weight-file", trunc_weight, "Weight file")->required();
    c_trunc->add_option("--a", trunc_a, "Truncation level")->required();
    c_trunc->add_option("--out", trunc_out, "Path for the truncated weight")->capture_default_str();
    c_trunc->add_flag("--two-sided", two_sided, "Clamp to [1/a, a]");

    auto* c_tele = app.add_subcommand("telescope", "Bellman telescope on random instances");
    add_common(c_tele, tele, true);
    c_tele->add_option("--depth", tele_depth, "Tree depth")->capture_default_str();
    c_tele->add_option("--samples", tele_samples, "Instances")->capture_default_str();
    c_tele->add_option("--a", tele_a, "Anchor, 0 for ell")->capture_default_str();
    c_tele->add_option("--weight-file", tele_weight, "Weight file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (c_cert->parsed()) return run_certify(cert, cert_samples);
        if (c_sweep->parsed()) return run_tau_sweep(sweep, sweep_samples);
        if (c_sim->parsed()) return run_simulate(sim, sim_depth, sim_samples, sim_delta, sim_weight);
        if (c_sharp->parsed()) {
            std::vector<double> grid;
            if (sharp_delta) grid = {*sharp_delta};
            else if (!grid_text.empty()) grid = parse_grid(grid_text);
            else throw UsageError("sharpness needs --delta-grid or --delta");
            return run_sharpness(sharp, sharp_depth, grid, restarts);
        }
        if (c_trunc->parsed()) return run_truncate(trunc_weight, trunc_a, two_sided, trunc_out);
        if (c_tele->parsed()) return run_telescope(tele, tele_depth, tele_samples, tele_a, tele_weight);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

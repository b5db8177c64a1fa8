#include "wdsub/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wdsub/errors.hpp"

namespace wdsub {

WeightTree::WeightTree(int depth, std::vector<double> leaves) : depth_(depth), leaves_(std::move(leaves)) {
    if (depth < 0 || depth > kMaxWeightDepth) throw InvalidInput("weight depth out of range");
    const std::size_t n = std::size_t{1} << depth;
    if (leaves_.size() != n) throw InvalidInput("weight needs 2^depth leaf values");
    for (double v : leaves_) {
        if (!std::isfinite(v) || !(v > 0.0)) throw InvalidInput("weight leaves must be finite and positive");
    }
    avg_w_.assign(2 * n, 0.0);
    avg_u_.assign(2 * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        avg_w_[n + k] = leaves_[k];
        avg_u_[n + k] = 1.0 / leaves_[k];
    }
    for (std::size_t i = n - 1; i >= 1; --i) {
        avg_w_[i] = 0.5 * (avg_w_[2 * i] + avg_w_[2 * i + 1]);
        avg_u_[i] = 0.5 * (avg_u_[2 * i] + avg_u_[2 * i + 1]);
    }
}

double a2_characteristic(const WeightTree& w) {
    double q = 1.0;
    const auto& aw = w.node_avg_w();
    const auto& au = w.node_avg_u();
    for (std::size_t i = 1; i < aw.size(); ++i) q = std::max(q, aw[i] * au[i]);
    return q;
}

WeightTree truncate_above(const WeightTree& w, double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("truncation level must be positive");
    std::vector<double> leaves = w.leaves();
    for (double& v : leaves) v = std::min(v, a);
    return WeightTree(w.depth(), std::move(leaves));
}

WeightTree invert(const WeightTree& w) {
    std::vector<double> leaves = w.leaves();
    for (double& v : leaves) v = 1.0 / v;
    return WeightTree(w.depth(), std::move(leaves));
}

WeightTree truncate_two_sided(const WeightTree& w, double a) {
    if (!(a >= 1.0) || !std::isfinite(a)) throw DomainError("two-sided truncation needs a ≥ 1");
    return invert(truncate_above(invert(truncate_above(w, a)), a));
}

WeightTree power_weight_family(double delta, int depth) {
    if (!(delta > -1.0) || !std::isfinite(delta)) throw DomainError("power weight needs delta > -1");
    if (depth < 0 || depth > kMaxWeightDepth) throw InvalidInput("weight depth out of range");
    const std::size_t n = std::size_t{1} << depth;
    const double eta = 1.0 + delta;
    // 2ⁿ∫ t^δ = 2^{−nδ}((k + 1)^η − k^η)/η, with the difference via expm1 to avoid cancellation.
    const double scale = std::exp(-depth * std::log(2.0) * delta) / eta;
    std::vector<double> leaves(n);
    leaves[0] = scale;
    for (std::size_t k = 1; k < n; ++k) {
        const double kd = static_cast<double>(k);
        leaves[k] = scale * std::exp(eta * std::log(kd)) * std::expm1(eta * std::log1p(1.0 / kd));
    }
    return WeightTree(depth, std::move(leaves));
}

WeightTree random_weight(int depth, double spread, std::mt19937_64& rng) {
    if (depth < 0 || depth > kMaxWeightDepth) throw InvalidInput("weight depth out of range");
    std::normal_distribution<double> G(0.0, 1.0);
    std::vector<double> level{0.0};
    for (int l = 0; l < depth; ++l) {
        std::vector<double> next(level.size() * 2);
        for (std::size_t k = 0; k < level.size(); ++k) {
            next[2 * k] = level[k] + spread * G(rng);
            next[2 * k + 1] = level[k] + spread * G(rng);
        }
        level.swap(next);
    }
    for (double& v : level) v = std::exp(v);
    return WeightTree(depth, std::move(level));
}

WeightTree random_truncated_weight(int depth, double Q, double eps, std::mt19937_64& rng) {
    if (!(Q >= 1.0)) throw ConfigError("Q must be at least 1");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    double spread = 1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        WeightTree w = truncate_two_sided(random_weight(depth, spread, rng), 1.0 / eps);
        if (a2_characteristic(w) <= Q) return w;
        spread *= 0.8;
    }
    return WeightTree(depth, std::vector<double>(std::size_t{1} << depth, 1.0));
}

std::string to_text(const WeightTree& w) {
    std::string out = "depth " + std::to_string(w.depth()) + "\n";
    char buf[64];
    for (double v : w.leaves()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out += buf;
    }
    return out;
}

WeightTree parse_weight(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    long long depth = -1;
    if (!(in >> word) || word != "depth" || !(in >> depth)) throw InvalidInput("weight file must start with 'depth n'");
    if (depth < 0 || depth > kMaxWeightDepth) throw InvalidInput("weight depth out of range");
    const std::size_t n = std::size_t{1} << depth;
    std::vector<double> leaves;
    leaves.reserve(n);
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw InvalidInput("malformed weight value '" + tok + "'");
        }
        if (used != tok.size()) throw InvalidInput("malformed weight value '" + tok + "'");
        leaves.push_back(v);
    }
    if (leaves.size() != n) throw InvalidInput("weight file has the wrong number of leaf values");
    return WeightTree(static_cast<int>(depth), std::move(leaves));
}

WeightTree read_weight_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open weight file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_weight(buf.str());
}

void write_weight_file(const WeightTree& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write weight file " + path);
    out << to_text(w);
}

}  // namespace wdsub

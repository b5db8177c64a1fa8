#pragma once

// Positive weights on the dyadic filtration of depth n, their conditional
// averages and the A₂ characteristic, plus the truncation operations.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace wdsub {

inline constexpr int kMaxWeightDepth = 24;

/// Leaf values w on the 2ⁿ atoms of F_n together with the node averages of w
/// and u = w⁻¹. Nodes use heap order: the root is 1 and node k has children
/// 2k and 2k + 1, so level ℓ occupies [2^ℓ, 2^{ℓ+1}).
class WeightTree {
public:
    /// Throws InvalidInput unless leaves has 2^depth finite positive entries.
    WeightTree(int depth, std::vector<double> leaves);

    int depth() const { return depth_; }
    std::size_t leaf_count() const { return leaves_.size(); }
    const std::vector<double>& leaves() const { return leaves_; }
    /// Heap-indexed averages; entry 0 is unused.
    const std::vector<double>& node_avg_w() const { return avg_w_; }
    const std::vector<double>& node_avg_u() const { return avg_u_; }
    double avg_w(std::size_t node) const { return avg_w_.at(node); }
    double avg_u(std::size_t node) const { return avg_u_.at(node); }

    static std::size_t node_index(int level, std::size_t k) { return (std::size_t{1} << level) + k; }

private:
    int depth_;
    std::vector<double> leaves_;
    std::vector<double> avg_w_;
    std::vector<double> avg_u_;
};

/// max over nodes I of ⟨w⟩_I⟨w⁻¹⟩_I, clamped below at 1. On a finite dyadic
/// filtration every stopping time stops on a union of nodes, so the node
/// maximum is the supremum over stopping times.
double a2_characteristic(const WeightTree& w);

/// Leaf-wise min(w, a). Throws DomainError unless a > 0.
WeightTree truncate_above(const WeightTree& w, double a);

/// Leaf-wise reciprocal.
WeightTree invert(const WeightTree& w);

/// Leaf-wise clamp(w, 1/a, a), computed as truncate_above, invert,
/// truncate_above, invert. Throws DomainError if a < 1.
WeightTree truncate_two_sided(const WeightTree& w, double a);

/// Leaf k = 2ⁿ∫ t^δ dt over [k2⁻ⁿ, (k + 1)2⁻ⁿ). Throws DomainError if δ ≤ −1.
WeightTree power_weight_family(double delta, int depth);

/// Multiplicative cascade: each child multiplies its parent's value by
/// exp(spread·g), g standard normal.
WeightTree random_weight(int depth, double spread, std::mt19937_64& rng);

/// A cascade weight truncated two-sidedly at 1/eps, with the spread shrunk
/// geometrically until the characteristic is at most Q.
WeightTree random_truncated_weight(int depth, double Q, double eps, std::mt19937_64& rng);

/// "depth n" followed by 2ⁿ leaf values, one per line, at full precision.
std::string to_text(const WeightTree& w);
/// Inverse of to_text. Throws InvalidInput on malformed input.
WeightTree parse_weight(const std::string& text);

WeightTree read_weight_file(const std::string& path);
void write_weight_file(const WeightTree& w, const std::string& path);

}  // namespace wdsub

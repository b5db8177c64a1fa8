#pragma once

// Vector-valued martingales on the dyadic filtration, subordinate pairs built
// from multipliers and rotations, weighted norms, the bilinear estimate, the
// Bellman telescope and the sharpness experiment.
//
// In discrete time every increment is a jump, so one-leg convexity of B is
// the single mechanism behind the telescope.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wdsub/bellman.hpp"
#include "wdsub/weights.hpp"

namespace wdsub {

class MollifiedBellman;

/// Depth limit for operations that enumerate every node.
inline constexpr int kMaxMartingaleDepth = 20;
/// Relative slack on |dY| ≤ |dX| absorbing roundoff from rebuilding node values.
inline constexpr double kSubordinationTolerance = 1e-12;

/// Node values of a martingale X_0, ..., X_n with values in ℝ^d. Nodes use the
/// heap order of WeightTree. The increment at an internal node I is
/// dX_I = (X_{2I} − X_{2I+1})/2, so the children are X_I ± dX_I.
class DyadicMartingale {
public:
    DyadicMartingale() = default;

    /// Leaf values, 2ⁿ rows of d entries each, averaged upward.
    static DyadicMartingale from_leaves(int depth, int dim, const std::vector<double>& leaves);
    /// X_0 and the increment at every internal node (heap index 1 .. 2ⁿ − 1,
    /// d entries per node). Leaves are built downward and averaged back up.
    static DyadicMartingale from_increments(int depth, int dim, const std::vector<double>& x0,
                                            const std::vector<double>& increments);

    int depth() const { return depth_; }
    int dim() const { return dim_; }
    std::size_t node_count() const { return std::size_t{2} << depth_; }
    std::size_t leaf_count() const { return std::size_t{1} << depth_; }
    std::size_t first_leaf() const { return leaf_count(); }

    const double* value(std::size_t node) const { return values_.data() + node * dim_; }
    std::vector<double> value_vector(std::size_t node) const;
    /// dX at an internal node, as a vector of d entries.
    std::vector<double> increment(std::size_t node) const;
    /// Heap-indexed increments (entry 0 is X_0), d entries per node.
    std::vector<double> increments() const;
    /// Leaf rows, 2ⁿ × d.
    std::vector<double> leaves() const;

    /// Max over internal nodes of |X_I − (X_{2I} + X_{2I+1})/2|.
    double martingale_defect() const;

private:
    int depth_ = 0;
    int dim_ = 1;
    std::vector<double> values_;
};

/// Level of a heap node; the root has level 0.
int node_level(std::size_t node);

struct SimConfig {
    int depth = 8;
    int dim = 2;
    std::uint64_t seed = 1;
    /// Path count for sampled estimates.
    std::size_t num_paths = 1000;

    /// Throws ConfigError unless 0 ≤ depth ≤ kMaxMartingaleDepth and dim ≥ 1.
    void validate() const;
};

/// Leaves i.i.d. standard normal per coordinate, drawn from rng.
DyadicMartingale random_martingale(int depth, int dim, std::mt19937_64& rng);
/// Same, seeded from cfg.seed.
DyadicMartingale random_martingale(const SimConfig& cfg);

/// dY_I = σ_I dX_I for internal I and Y_0 = σ_0 X_0. sigma has 2ⁿ entries:
/// index 0 is σ_0, index I the multiplier at node I. Throws InvalidInput if
/// some |σ| > 1 or the size is wrong.
DyadicMartingale transform(const DyadicMartingale& x, const std::vector<double>& sigma);

/// Uniform random orthogonal d × d matrix, row-major.
std::vector<double> random_orthogonal(int dim, std::mt19937_64& rng);

/// Y with every increment and Y_0 rotated by an independent random orthogonal
/// matrix; |dY_I| = |dX_I| at every node.
DyadicMartingale rotate_increments(const DyadicMartingale& x, std::mt19937_64& rng);

struct SubordinationResult {
    bool subordinate = true;
    /// First violating node in heap order (0 for the root value) when not subordinate.
    std::optional<std::size_t> first_violation;
    double norm_x = 0.0;
    double norm_y = 0.0;
};

/// |Y_0| ≤ |X_0| and |dY_I| ≤ |dX_I| at every internal node, up to
/// kSubordinationTolerance relative. Throws InvalidInput on shape mismatch.
SubordinationResult check_subordination(const DyadicMartingale& x, const DyadicMartingale& y);

/// (𝔼|X_n|² w)^{1/2}. By conditional Jensen this is sup_k ‖X_k‖_{2,w}.
double weighted_norm(const DyadicMartingale& x, const WeightTree& w);
/// Same with u = w⁻¹.
double weighted_norm_inverse(const DyadicMartingale& x, const WeightTree& w);

/// |⟨Y_0, Z_0⟩| + 𝔼 Σ_k |⟨dY_k, dZ_k⟩|.
double bilinear_form(const DyadicMartingale& y, const DyadicMartingale& z);
/// |X_0||Z_0| + 𝔼 Σ_k |dX_k||dZ_k|.
double increment_product(const DyadicMartingale& x, const DyadicMartingale& z);
/// 𝔼⟨Y_n, Z_n⟩.
double terminal_inner(const DyadicMartingale& y, const DyadicMartingale& z);

/// Monte Carlo estimate of 𝔼|X_n|² from random root-to-leaf paths.
struct SampledEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};
SampledEstimate sampled_square_norm(const DyadicMartingale& x, std::size_t paths, std::mt19937_64& rng);

struct BilinearResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool pass = false;
    double Q2 = 1.0;
    /// 𝔼F = ‖X‖²_{2,w} and 𝔼G = ‖Z‖²_{2,u}.
    double EF = 0.0;
    double EG = 0.0;
    /// λ² = (𝔼G)^{1/2}(𝔼F)^{−1/2}, balancing λ²𝔼F and λ⁻²𝔼G.
    double lambda_sq = 1.0;
    /// Q2·C_size·(λ²𝔼F + λ⁻²𝔼G)/2 at λ = 1 and at the balancing λ.
    double bellman_bound_unit = 0.0;
    double bellman_bound_opt = 0.0;
    /// lhs ≤ 𝔼Σ|dX||dZ| ≤ bellman_bound_opt.
    bool within_bellman_bound = false;
};

/// lhs = bilinear_form(Y, Z), rhs = Q2(w)·‖X‖_{2,w}·‖Z‖_{2,u}. Throws
/// InvalidInput if Y is not subordinate to X.
BilinearResult verify_bilinear_estimate(const DyadicMartingale& x, const DyadicMartingale& y,
                                        const DyadicMartingale& z, const WeightTree& w, double C_target,
                                        const BellmanConfig& cfg);

struct TelescopeOptions {
    /// Anchor prepended to x and z; must be at least cfg.ell.
    double a = 0.0;
    /// Uses the mollified function (one-leg constant 1) instead of B (constant 2).
    const MollifiedBellman* mollified = nullptr;
    double margin_tolerance = 1e-8;
    double linear_tolerance = 1e-10;
    double domain_slack = 1e-12;
};

struct TelescopeResult {
    /// 𝔼 Σ (c/Q)|ΔX||ΔZ| over all steps, the first being the jump from 0 to X_0.
    double lhs = 0.0;
    /// 𝔼 Σ of one-leg gaps B(V_{k+1}) − B(V_k) − dB(V_k)ΔV.
    double sum_increments = 0.0;
    double b_start = 0.0;
    double b_end = 0.0;
    double EF = 0.0;
    double EG = 0.0;
    /// C_size·(𝔼F + 𝔼G + 2a²/ε).
    double bellman_bound = 0.0;
    double min_margin = 0.0;
    std::size_t worst_node = 0;
    /// Per-level minimum of gap − (c/Q)|ΔX||ΔZ|; entry 0 is the initial jump.
    std::vector<double> per_step_margins;
    /// Max over internal nodes of |Σ_children dB(V_I)ΔV| / Σ_children Σ|∂B||ΔV|.
    double max_linear_residual = 0.0;
    bool aggregate_ok = false;
    bool pass = false;
};

/// Runs the telescope for V_k = ((a, X_k), (a, Z_k), ⟨u⟩_k, ⟨w⟩_k), starting
/// from V_{−1} = ((a, 0), (a, 0), ⟨u⟩_0, ⟨w⟩_0). Throws DomainError naming the
/// cause when some V_k leaves D_Q^{ε,ℓ}: an anchor below ℓ, or a weight
/// outside [ε, 1/ε] or with characteristic above Q.
TelescopeResult bellman_telescope(const DyadicMartingale& x, const DyadicMartingale& z, const WeightTree& w,
                                  const BellmanConfig& cfg, const TelescopeOptions& options = {});

struct AnchorSensitivity {
    double a = 0.0;
    double lhs = 0.0;
    double bellman_bound = 0.0;
    double min_margin = 0.0;
    bool pass = false;
};

/// Telescope at a ∈ {ℓ, 2ℓ, 10ℓ}.
std::vector<AnchorSensitivity> anchor_sensitivity(const DyadicMartingale& x, const DyadicMartingale& z,
                                                  const WeightTree& w, const BellmanConfig& cfg);

struct MainTheoremResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    bool pass = false;
    double Q2 = 1.0;
    /// (Y_n, Y_n w)/‖Y_n w‖_{2,u}, equal to ‖Y‖_{2,w}.
    double dual_extremal = 0.0;
    /// Best ratio over the random test functions.
    double dual_random = 0.0;
    /// |dual_extremal − ‖Y‖_{2,w}| / ‖Y‖_{2,w}.
    double duality_gap = 0.0;
    /// bilinear_form(Y, Yw)/(Q2 ‖X‖_{2,w}‖Yw‖_{2,u}).
    double bilinear_ratio = 0.0;
};

/// lhs = sup_Z (Y_n, Z_n)/‖Z‖_{2,u} over `test_functions` random Z and the
/// extremal Z_n = Y_n w; rhs = Q2(w)·‖X‖_{2,w}. Throws InvalidInput if Y is
/// not subordinate to X.
MainTheoremResult verify_main_theorem(const DyadicMartingale& x, const DyadicMartingale& y, const WeightTree& w,
                                      double C_target, std::uint64_t seed, std::size_t test_functions = 16);

struct ProjectionRow {
    int d_sub = 0;
    double norm_x = 0.0;
    double norm_y = 0.0;
    double bilinear = 0.0;
    double increment_product = 0.0;
    /// 𝔼 Σ |(I − P)dX||(I − P)dY| with the time-0 term.
    double tail_bound = 0.0;
};

struct ProjectionReport {
    std::vector<ProjectionRow> rows;
    bool monotone = false;
    bool dominated = false;
    bool exact_at_full = false;
    bool bilinear_within_tail = false;
    bool pass = false;
};

/// Quantities for the projections onto the first k coordinates, k = 1 .. d_sub
/// and k = dim, compared with the full ones.
ProjectionReport projection_consistency(const DyadicMartingale& x, const DyadicMartingale& y, const WeightTree& w,
                                        int d_sub);

struct SharpnessRow {
    double delta = 0.0;
    int depth = 0;
    double Q2 = 1.0;
    double worst_ratio = 0.0;
};

struct SharpnessResult {
    std::vector<SharpnessRow> rows;
    double slope = 0.0;
    double intercept = 0.0;
    /// max over rows of worst_ratio / Q2.
    double max_ratio_over_Q2 = 0.0;
};

struct SharpnessOptions {
    int restarts = 32;
    int rounds = 8;
    int power_iterations = 40;
    std::uint64_t seed = 1;
    int jobs = 0;
};

/// Lower estimate of sup_{σ, f} ‖T_σ f‖_{2,w}/‖f‖_{2,w} for the power weight
/// t^δ at the given depth: alternates power iteration in f with a level-wise
/// greedy choice of signs, from `restarts` random starts.
double sharpness_ratio(const WeightTree& w, const SharpnessOptions& options, std::uint64_t stream = 0);

/// Runs sharpness_ratio over delta_grid and fits log(worst_ratio) against
/// log(Q2) by least squares over the rows with Q2 > 1.
SharpnessResult sharpness_experiment(const std::vector<double>& delta_grid, int depth,
                                     const SharpnessOptions& options = {});

/// Deltas in (−1, 0) whose power weights at `depth` have characteristic
/// geometrically spaced over [q_lo, q_hi], found by bisection.
std::vector<double> deltas_for_characteristic(double q_lo, double q_hi, int count, int depth);

std::string sharpness_csv(const SharpnessResult& result);

/// "depth n dim d", then one line per node in heap order with d values.
std::string to_text(const DyadicMartingale& x);
/// Inverse of to_text. Throws InvalidInput on malformed input or when the
/// node values are not averages of their children.
DyadicMartingale parse_martingale(const std::string& text);

}  // namespace wdsub

#pragma once

// Sampled certification of the properties of B: size, Hessian lower bound,
// one-leg convexity, the ellipse parameter τ(V), the ∂²ₓ/∂²ᵧ upper bounds and
// C¹ continuity across the H4 cuts.
//
// Margins are normalised so that a single absolute tolerance applies:
//   size          (C_size·B1 − B)/(C_size·B1)
//   hessian_lower ((d²B dV, dV) − (2/Q)|dx||dy|)/(‖d²B‖·|dV|²)
//   one_leg       (B(V) − B(V0) − dB(V0)(ΔV) − (c/Q)|Δx||Δy|)/(|B(V)| + |B(V0)| + |dB(V0)(ΔV)|)
//   tau           λ_min(Q·d²B − diag(τI, τ⁻¹I, 0, 0))/‖Q·d²B‖
//   partial_xx    (C_xx/ε − λ_max(∂²ₓB))/(C_xx/ε)

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wdsub/bellman.hpp"
#include "wdsub/mollify.hpp"

namespace wdsub {

inline constexpr double kMarginTolerance = 1e-8;
inline constexpr double kTauTolerance = 1e-6;
inline constexpr double kTauSlackLo = 0.1;
inline constexpr double kTauSlackHi = 10.0;
inline constexpr std::size_t kRandomDirections = 64;

/// Point distribution: log(rs) uniform on [0, log min(Q, ε⁻²)], log r uniform on
/// the slice of the ε-box with that product, directions of x and y uniform on
/// the sphere and |x|, |y| log-uniform on [ℓ, ε⁻¹].
struct SampleSpec {
    std::size_t count = 10000;
    std::uint64_t seed = 1;
    double Q = 16.0;
    double eps = 0.1;
    double ell = 0.05;
    int dim = 2;
    /// Points with min(|q1|, |q2|)/max(|x|, |y|, 1) below this are treated as cut-adjacent.
    double exclusion_margin = 1e-6;
    /// Pairs used for the mollified one-leg check (each costs a full kernel sweep).
    std::size_t mollified_pairs = 200;
    /// Points per deterministic RNG substream.
    std::size_t batch_size = 64;

    /// Throws ConfigError on invalid parameters.
    void validate() const;
    BellmanConfig bellman_config() const;
};

std::vector<StatePoint> sample_domain(const SampleSpec& spec);

/// Relative distance of V from the H4 cuts, min(|q1|, |q2|)/max(|x|, |y|, 1).
double cut_distance(const StatePoint& v, const BellmanConfig& cfg);

/// (d²B dV, dV) − (2/Q)|dx||dy|, unnormalised. Returns nullopt for cut-adjacent V.
std::optional<double> check_hessian_lower(const StatePoint& v, const Perturbation& dv, const BellmanConfig& cfg,
                                          double exclusion_margin = 1e-6);

/// B(V) − B(V0) − dB(V0)(V − V0) − (constant/Q)|x − x0||y − y0|, unnormalised.
/// Throws DomainError if either point leaves D_Q^ε (with roundoff slack).
double check_one_leg(const StatePoint& v0, const StatePoint& v, const BellmanConfig& cfg, double constant = 2.0);

/// Same for B_ℓ.
double check_one_leg(const StatePoint& v0, const StatePoint& v, const MollifiedBellman& b, double constant = 1.0);

struct TauResult {
    double tau = 0.0;
    /// max over τ of λ_min(D_τ^{-1/2}·Q·S·D_τ^{-1/2}); ≥ 1 means the ellipse bound holds at τ.
    double mu = 0.0;
    /// λ_min(Q·d²B − diag(τI, τ⁻¹I, 0, 0))/‖Q·d²B‖.
    double exact_margin = 0.0;
    /// min over sampled unit dV of Q·(d²B dV, dV) − τ|dx|² − τ⁻¹|dy|².
    double sampled_margin = 0.0;
    bool success = false;
    bool within_bounds = false;
};

/// τ(V) for the ellipse lower bound Q·d²B ≥ τ|dx|² + τ⁻¹|dy|².
///
/// τ maximises μ(τ) = λ_min(D_τ^{-1/2}·Q·S·D_τ^{-1/2}), with S the Schur
/// complement of d²B with respect to the (r, s) block and D_τ = diag(τI, τ⁻¹I),
/// by golden-section search on log τ over [ε/(100Q), 100Q/ε]. μ is
/// quasi-concave in τ, so the search is exact up to its resolution. The
/// returned τ is then tested on the full Hessian and on kRandomDirections
/// random plus 8 structured unit directions drawn from `rng_seed`.
TauResult extract_tau(const StatePoint& v, const BellmanConfig& cfg, std::uint64_t rng_seed = 0);

/// C_xx such that ∂²ₓB ≤ C_xx·ε⁻¹ on D_Q^ε, from the certified coefficients:
/// C_xx = 2(c1 + c2 + c3 + c7(2 + 1/γ)), γ = 1 − (1 − 1/(8√Q))²/Q.
double partial_xx_constant(const BellmanConfig& cfg);

/// C_xx·ε⁻¹|dx|² − (∂²ₓB dx, dx).
double check_partial_xx_bound(const StatePoint& v, const std::vector<double>& dx, const BellmanConfig& cfg);
/// C_xx·ε⁻¹|dy|² − (∂²ᵧB dy, dy).
double check_partial_yy_bound(const StatePoint& v, const std::vector<double>& dy, const BellmanConfig& cfg);

/// Gradient of B4 = H4(|x|, |y|, r, s, K(r, s)), ordered (∂x, ∂y, ∂r, ∂s).
std::vector<double> b4_gradient(const StatePoint& v, const BellmanConfig& cfg);

struct CutLevel {
    double delta = 0.0;
    std::size_t points = 0;
    /// Largest one-sided gradient mismatch of B4, relative to the gradient size.
    double max_mismatch = 0.0;
};

struct CutFamily {
    /// "q2" for {|x|s = |y|K}, "q1" for {|y|r = |x|K}, "corner" for |x|, |y| ≤ ε near {|x|s = |y|K}.
    std::string name;
    std::vector<CutLevel> levels;
    /// Least-squares slope of log max_mismatch against log δ.
    double rate = 0.0;
    bool pass = false;
};

struct CutReport {
    std::vector<CutFamily> families;
    bool pass = false;
};

inline constexpr double kCutRateMin = 0.9;
inline constexpr double kCutMismatchAtSmallest = 1e-2;

/// Samples n base points on each cut and compares gradients of B4 at the two
/// points displaced by relative distance δ ∈ {1e-2, 1e-3, 1e-4} to either side.
/// Passes when every family decays at rate ≥ kCutRateMin and the mismatch at
/// the smallest δ is below kCutMismatchAtSmallest.
CutReport check_c1_across_cuts(const BellmanConfig& cfg, std::size_t n, std::uint64_t seed = 1, int jobs = 0);

struct CheckResult {
    std::string name;
    std::size_t samples = 0;
    std::size_t skipped = 0;
    double min_margin = 0.0;
    std::optional<StatePoint> worst_point;
    double tolerance = kMarginTolerance;
    bool pass = true;
    /// Best constant seen by the check; meaning documented per check.
    double observed = 0.0;
    std::string observed_label;
};

struct TauStats {
    std::size_t samples = 0;
    std::size_t failures = 0;
    double min = 0.0;
    double max = 0.0;
    double bound_lo = 0.0;
    double bound_hi = 0.0;
    bool within_bounds = true;
    /// Median of log(τ(λx, y/λ)/τ(x, y))/log λ over λ ∈ {1/2, 2}; recorded only.
    double scaling_exponent = 0.0;
};

struct CertReport {
    BellmanConfig cfg;
    SampleSpec spec;
    std::vector<CheckResult> checks;
    TauStats tau;
    std::optional<CutReport> cuts;
    bool no_samples = false;
    bool pass = true;
    /// Wall-clock seconds; kept out of the serialised forms so reports are byte-stable.
    double runtime_seconds = 0.0;
};

struct CertOptions {
    int jobs = 0;
    /// Base points per cut family for check_c1_across_cuts; 0 skips it.
    std::size_t cut_points = 1000;
};

CertReport run_certification(const BellmanConfig& cfg, const SampleSpec& spec, const CertOptions& options = {});

/// Indented key-value document with one block per check.
std::string to_structured_text(const CertReport& report);
/// One row per check.
std::string to_csv(const CertReport& report);

struct TauSweepRow {
    std::size_t id = 0;
    double r = 0.0;
    double s = 0.0;
    double norm_x = 0.0;
    double norm_y = 0.0;
    double tau = 0.0;
    bool success = false;
};

std::vector<TauSweepRow> tau_sweep(const BellmanConfig& cfg, const SampleSpec& spec, int jobs = 0);
std::string tau_sweep_csv(const std::vector<TauSweepRow>& rows);

}  // namespace wdsub

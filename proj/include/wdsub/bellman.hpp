#pragma once

// Explicit four-variable Bellman function B(x, y, r, s) for weighted
// differential subordination, together with its components, derivatives and
// region structure.
//
// B = c1·B1 + c2·B2 + c3·B3 + c7·(B4 + B5 + B6) where
//   B1 = |x|²/r + |y|²/s
//   B2 = |x|²/(r + M) + |y|²/s,          M = r − 1/(s(N + 1))
//   B3 = |x|²/r + |y|²/(2s − 1/(r(N + 1)))
//   B4 = H4(|x|, |y|, r, s, K)           H4 = sup_{a>0} |x|²/(r + aK) + |y|²/(s + K/a)
//   B5, B6 as B2, B3 with K in place of N
// and K, N are the concave profiles of t = rs on 1 ≤ rs ≤ Q.

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wdsub {

/// Weights of the four summands of B.
struct Coefficients {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double c7 = 0.0;

    bool operator==(const Coefficients&) const = default;
};

/// Coefficients certified by determine_coefficients() with the default headroom.
Coefficients default_coefficients();

struct BellmanConfig {
    double Q = 16.0;
    double eps = 0.1;
    double ell = 0.05;
    int dim = 2;
    Coefficients coeffs = default_coefficients();

    /// Throws ConfigError unless Q ≥ 1, 0 < eps < 1, 0 < ell ≤ eps/2, dim ≥ 1,
    /// every coefficient is positive and the coefficients pass the reduced
    /// Hessian-bound check.
    void validate() const;

    /// C_size = c1 + c2 + c3 + 3·c7, so that B ≤ C_size·(|x|²/r + |y|²/s).
    double size_constant() const;
};

/// V = (x, y, r, s).
struct StatePoint {
    std::vector<double> x;
    std::vector<double> y;
    double r = 1.0;
    double s = 1.0;

    std::size_t dim() const { return x.size(); }
    /// Flattened (x, y, r, s); requires x and y of equal length.
    std::vector<double> flatten() const;
    static StatePoint unflatten(std::span<const double> flat);
};

/// Direction dV = (dx, dy, dr, ds).
struct Perturbation {
    std::vector<double> dx;
    std::vector<double> dy;
    double dr = 0.0;
    double ds = 0.0;

    std::vector<double> flatten() const;
    static Perturbation unflatten(std::span<const double> flat);
};

struct DomainFlags {
    bool in_DQ = false;
    bool in_DQ_eps = false;
    bool in_DQ_eps_ell = false;
};

/// Regions of H4: R1 (interior critical point), R2 (H4 = |y|²/s),
/// R3 (H4 = |x|²/r), Cut (within cut tolerance of the R1 boundary).
enum class Region { R1, R2, R3, Cut };

std::string to_string(Region region);

/// Relative distance to the H4 cuts below which a point counts as Cut.
inline constexpr double kCutTolerance = 1e-8;

/// Membership in D_Q, D_Q^ε and D_Q^{ε,ℓ}, evaluated without tolerance.
DomainFlags domain_check(const StatePoint& v, const BellmanConfig& cfg);

double eval_B1(const StatePoint& v);

/// K(r,s) = √(rs/Q)(1 − √(rs)/(8√Q)). Throws DomainError unless 1 ≤ rs ≤ Q.
double eval_K(double r, double s, double Q);
/// N(r,s) = √(rs/Q)(1 − (rs)²/(128Q²)). Throws DomainError unless 1 ≤ rs ≤ Q.
double eval_N(double r, double s, double Q);
/// M(r,s) = r − 1/(s(N + 1)).
double eval_M(double r, double s, double Q);

double eval_B2(const StatePoint& v, const BellmanConfig& cfg);
double eval_B3(const StatePoint& v, const BellmanConfig& cfg);
double eval_B4(const StatePoint& v, const BellmanConfig& cfg);
double eval_B5(const StatePoint& v, const BellmanConfig& cfg);
double eval_B6(const StatePoint& v, const BellmanConfig& cfg);
double eval_B7(const StatePoint& v, const BellmanConfig& cfg);

/// Region of H4 from the signs of |y|r − |x|K and |x|s − |y|K, given the norms
/// |x| = norm_x and |y| = norm_y.
Region classify_region(double norm_x, double norm_y, double r, double s, double K);

/// Signed cut quantities (|y|r − |x|K, |x|s − |y|K).
std::array<double, 2> cut_quantities(double norm_x, double norm_y, double r, double s, double K);

/// H4 in closed form on its three regions. Throws DomainError if K² ≥ rs.
double eval_H4(double norm_x, double norm_y, double r, double s, double K);

/// Partial derivatives of H4 with respect to its five real arguments.
struct H4Gradient {
    double d_norm_x = 0.0;
    double d_norm_y = 0.0;
    double dr = 0.0;
    double ds = 0.0;
    double dK = 0.0;
};

H4Gradient grad_H4(double norm_x, double norm_y, double r, double s, double K);

/// Value, gradient and Hessian of B at one point.
struct EvalResult {
    double value = 0.0;
    /// ∂x (dim entries), ∂y (dim entries), ∂r, ∂s.
    std::vector<double> gradient;
    Eigen::MatrixXd hessian;
    Region region = Region::R1;
    /// True when the Hessian came from a finite-difference stencil near a cut.
    bool degraded = false;

    /// (d²B dV, dV).
    double hessian_form(const Perturbation& dv) const;
};

struct EvalOptions {
    bool with_hessian = true;
    /// Relative slack on 1 ≤ rs ≤ Q and the ε-box, for points produced by
    /// floating-point averaging that sit on the boundary up to roundoff.
    double domain_slack = 0.0;
};

/// Evaluates B. Requires V ∈ D_Q^ε (up to options.domain_slack).
EvalResult eval_B(const StatePoint& v, const BellmanConfig& cfg, const EvalOptions& options = {});

/// B(V) without domain checks or derivatives.
double bellman_value(const StatePoint& v, const BellmanConfig& cfg);
/// Closed-form gradient of B, ordered (∂x, ∂y, ∂r, ∂s).
std::vector<double> bellman_gradient(const StatePoint& v, const BellmanConfig& cfg);
/// Exact Hessian from hyper-dual evaluation on the branch selected at V.
Eigen::MatrixXd bellman_hessian(const StatePoint& v, const BellmanConfig& cfg);
/// (d²B dV, dV) from a single hyper-dual evaluation.
double bellman_hessian_form(const StatePoint& v, const Perturbation& dv, const BellmanConfig& cfg);
/// Hessian of B restricted to the x block (dim × dim).
Eigen::MatrixXd bellman_hessian_xx(const StatePoint& v, const BellmanConfig& cfg);

/// Region of the B4 term at V, including the Cut tag.
Region region_of(const StatePoint& v, const BellmanConfig& cfg);

/// Outcome of the reduced nonnegativity check on the coefficient vector.
///
/// With p = |dx|, q = |dy|, ρ = |x||dr|/r, σ = |y||ds|/s the weighted sum of
/// the component Hessian lower bounds, multiplied by Q, is
///   4c1(p − ρ)(q − σ) + (√3/2)c2·ρ(q − σ) + (√3/2)c3·σ(p − ρ) + (c7/256)·ρσ,
/// and it must dominate 2pq on the nonnegative orthant.
struct CoefficientCheck {
    bool feasible = false;
    /// Minimum of (weighted sum − 2pq) over the unit directions examined.
    double min_margin = 0.0;
    /// (p, q, ρ, σ) at the minimum.
    std::array<double, 4> worst_direction{};
    std::size_t directions_checked = 0;
};

/// Coefficients of the reduced form minus 2pq in the monomial basis
/// (pq, pσ, ρq, ρσ). The reduced check passes iff all four are nonnegative.
std::array<double, 4> reduced_form_coefficients(const Coefficients& c);

/// Reduced margin at one direction (p, q, ρ, σ).
double reduced_margin(const Coefficients& c, double p, double q, double rho, double sigma);

/// Checks the reduced problem on a grid of `grid` angles per spherical
/// coordinate of the positive orthant of S³.
CoefficientCheck check_coefficients(const Coefficients& c, int grid = 48);

/// Thrown when a coefficient draft fails the reduced check.
class InfeasibleCoefficients : public std::runtime_error {
public:
    InfeasibleCoefficients(const std::string& what, std::array<double, 4> direction)
        : std::runtime_error(what), direction_(direction) {}
    const std::array<double, 4>& direction() const { return direction_; }

private:
    std::array<double, 4> direction_;
};

/// Returns certified coefficients for the given Q.
///
/// Without a draft the smallest feasible vector is built and inflated by
/// (1 + headroom) at every step, which leaves every coefficient of the reduced
/// bilinear form strictly positive. A draft is validated and returned unchanged,
/// or rejected with InfeasibleCoefficients naming the violated direction.
Coefficients determine_coefficients(double Q, const std::optional<Coefficients>& draft = std::nullopt,
                                    double headroom = 0.25);

}  // namespace wdsub

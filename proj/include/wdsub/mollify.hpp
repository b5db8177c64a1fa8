#pragma once

// Regularisation of H4 by convolution with a compactly supported bump in the
// five real variables (|x|, |y|, r, s, K), and the resulting C² surrogate B_ℓ.

#include <array>
#include <cstddef>
#include <vector>

#include "wdsub/bellman.hpp"

namespace wdsub {

/// Discrete bump exp(−1/(1 − |u|²)) on the unit ball of R⁵, scaled to radius
/// ell and sampled on the lattice of spacing ell/m. Weights sum to one.
struct MollifierKernel {
    double ell = 0.0;
    int m = 0;
    double spacing = 0.0;
    std::vector<std::array<double, 5>> offsets;
    std::vector<double> weights;
    /// Σ bump(u_k)·(1/m)⁵ before normalisation; approximates ∫ bump over the ball.
    double riemann_mass = 0.0;

    /// Throws ConfigError unless ell > 0 and m ≥ 4.
    static MollifierKernel build(double ell, int m = 4);
};

/// ∫ over the unit ball of R⁵ of exp(−1/(1 − |u|²)) du, by radial quadrature.
double bump_mass_5d();

/// H4 ∗ φ_ℓ at one point of (|x|, |y|, r, s, K).
double mollified_H4(const MollifierKernel& kernel, double norm_x, double norm_y, double r, double s, double K);

/// B_ℓ: B with its H4 term replaced by the mollified H4 composed with K(r, s).
class MollifiedBellman {
public:
    MollifiedBellman(const BellmanConfig& cfg, int m = 4);

    const BellmanConfig& config() const { return cfg_; }
    const MollifierKernel& kernel() const { return kernel_; }

    double value(const StatePoint& v) const;
    /// (∂x, ∂y, ∂r, ∂s) from first-order hyper-dual evaluation.
    std::vector<double> gradient(const StatePoint& v) const;
    double hessian_form(const StatePoint& v, const Perturbation& dv) const;

private:
    BellmanConfig cfg_;
    MollifierKernel kernel_;
};

/// Regular grid in (|x|, |y|, r, s, K).
struct GridSpec {
    std::array<double, 5> lower{};
    std::array<double, 5> upper{};
    std::array<int, 5> points{};

    std::array<double, 5> spacing() const;
    std::size_t size() const;
};

/// Mollified H4 sampled on a grid; immutable after construction.
class MollifiedGrid {
public:
    MollifiedGrid(GridSpec spec, std::vector<double> values) : spec_(spec), values_(std::move(values)) {}

    const GridSpec& spec() const { return spec_; }
    const std::vector<double>& values() const { return values_; }
    std::array<double, 5> coordinates(const std::array<int, 5>& index) const;
    double at(const std::array<int, 5>& index) const;
    /// Second difference (f(i + e) − 2f(i) + f(i − e))/|e·h|² along the integer
    /// lattice direction e; requires i ± e inside the grid.
    double second_difference(const std::array<int, 5>& index, const std::array<int, 5>& e) const;

private:
    std::size_t flat_index(const std::array<int, 5>& index) const;

    GridSpec spec_;
    std::vector<double> values_;
};

/// Samples H4 ∗ φ_ℓ on the grid. Throws ConfigError when a spacing exceeds
/// ell/4 or when the kernel support around the box leaves the region where
/// |x|, |y|, r, s, K ≥ 0 and rs > K².
MollifiedGrid mollify_H4(double ell, const GridSpec& grid, int m = 4);

}  // namespace wdsub

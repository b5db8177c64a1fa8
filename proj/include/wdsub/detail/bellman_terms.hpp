#pragma once

// Scalar-generic formulas shared by the plain, hyper-dual and mollified
// evaluations of B. T is double or HyperDual.

#include <cmath>
#include <span>

#include "wdsub/bellman.hpp"
#include "wdsub/hyperdual.hpp"

namespace wdsub::detail {

template <class T>
T profile_K(const T& t, double Q) {
    using std::sqrt;
    return sqrt(t) * (1.0 / std::sqrt(Q)) - t * (1.0 / (8.0 * Q));
}

template <class T>
T profile_N(const T& t, double Q) {
    using std::sqrt;
    const T st = sqrt(t);
    return st * (1.0 / std::sqrt(Q)) - t * t * st * (1.0 / (128.0 * Q * Q * std::sqrt(Q)));
}

inline double profile_K_prime(double t, double Q) { return 0.5 / std::sqrt(t * Q) - 1.0 / (8.0 * Q); }

inline double profile_N_prime(double t, double Q) {
    return 0.5 / std::sqrt(t * Q) - 2.5 * std::pow(t, 1.5) / (128.0 * Q * Q * std::sqrt(Q));
}

// sq / (2·own − 1/(other·(profile + 1))): the first summand of B2, B3, B5, B6.
template <class T>
T leg_term(const T& sq, const T& own, const T& other, const T& profile) {
    return sq / (2.0 * own - 1.0 / (other * (profile + 1.0)));
}

// H4 on the branch selected by the signs of the cut quantities at the real
// part of the arguments.
template <class T>
T h4_value(const T& X2, const T& Y2, const T& r, const T& s, const T& K) {
    using std::sqrt;
    const double nx = std::sqrt(value_of(X2));
    const double ny = std::sqrt(value_of(Y2));
    const double a = ny * value_of(r) - nx * value_of(K);
    const double b = nx * value_of(s) - ny * value_of(K);
    if (a > 0.0 && b > 0.0) {
        const T nxT = sqrt(X2);
        const T nyT = sqrt(Y2);
        return (X2 * s - 2.0 * nxT * nyT * K + Y2 * r) / (r * s - K * K);
    }
    if (a > 0.0) return Y2 / s;
    return X2 / r;
}

struct PlainH4 {
    template <class T>
    T operator()(const T& X2, const T& Y2, const T& r, const T& s, const T& K) const {
        return h4_value(X2, Y2, r, s, K);
    }
};

// B from squared norms; h4 supplies the B4 term so the mollified variant can
// substitute its smoothed H4 before composition with K.
template <class T, class H4Fn>
T bellman_total(const T& X2, const T& Y2, const T& r, const T& s, const BellmanConfig& cfg, const H4Fn& h4) {
    const T t = r * s;
    const T K = profile_K(t, cfg.Q);
    const T N = profile_N(t, cfg.Q);
    const T xr = X2 / r;
    const T ys = Y2 / s;
    const auto& c = cfg.coeffs;
    const T b1 = xr + ys;
    const T b2 = leg_term(X2, r, s, N) + ys;
    const T b3 = xr + leg_term(Y2, s, r, N);
    const T b4 = h4(X2, Y2, r, s, K);
    const T b5 = leg_term(X2, r, s, K) + ys;
    const T b6 = xr + leg_term(Y2, s, r, K);
    return c.c1 * b1 + c.c2 * b2 + c.c3 * b3 + c.c7 * (b4 + b5 + b6);
}

// B from the flattened coordinates (x, y, r, s) with x, y of length dim.
template <class T, class H4Fn>
T bellman_flat(std::span<const T> flat, std::size_t dim, const BellmanConfig& cfg, const H4Fn& h4) {
    T X2 = 0.0;
    T Y2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        X2 += flat[i] * flat[i];
        Y2 += flat[dim + i] * flat[dim + i];
    }
    return bellman_total(X2, Y2, flat[2 * dim], flat[2 * dim + 1], cfg, h4);
}

}  // namespace wdsub::detail

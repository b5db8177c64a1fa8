#pragma once

#include <cmath>

namespace wdsub {

/// Hyper-dual number a + b·e1 + c·e2 + d·e1e2 with e1² = e2² = 0.
///
/// Seeding e1 with direction u and e2 with direction v makes the e1e2 part of
/// f(p) equal to uᵀ∇²f(p)v without truncation error, which is how the
/// Bellman Hessians are assembled.
struct HyperDual {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d12 = 0.0;

    constexpr HyperDual() = default;
    constexpr HyperDual(double value) : v(value) {}  // NOLINT: implicit by design of scalar templates
    constexpr HyperDual(double value, double e1, double e2, double e12)
        : v(value), d1(e1), d2(e2), d12(e12) {}

    HyperDual& operator+=(const HyperDual& o) {
        v += o.v;
        d1 += o.d1;
        d2 += o.d2;
        d12 += o.d12;
        return *this;
    }
    HyperDual& operator-=(const HyperDual& o) {
        v -= o.v;
        d1 -= o.d1;
        d2 -= o.d2;
        d12 -= o.d12;
        return *this;
    }
};

inline HyperDual operator-(const HyperDual& a) { return {-a.v, -a.d1, -a.d2, -a.d12}; }
inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }

inline HyperDual operator*(const HyperDual& a, const HyperDual& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + a.v * b.d2,
            a.d12 * b.v + a.d1 * b.d2 + a.d2 * b.d1 + a.v * b.d12};
}

// Applies a scalar function with value f, first derivative f1 and second f2.
inline HyperDual apply_chain(const HyperDual& a, double f, double f1, double f2) {
    return {f, f1 * a.d1, f1 * a.d2, f1 * a.d12 + f2 * a.d1 * a.d2};
}

inline HyperDual reciprocal(const HyperDual& a) {
    const double inv = 1.0 / a.v;
    return apply_chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline HyperDual operator/(const HyperDual& a, const HyperDual& b) { return a * reciprocal(b); }

inline HyperDual sqrt(const HyperDual& a) {
    const double s = std::sqrt(a.v);
    return apply_chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

inline double value_of(double x) { return x; }
inline double value_of(const HyperDual& x) { return x.v; }

}  // namespace wdsub

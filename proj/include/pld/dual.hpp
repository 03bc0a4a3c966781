#pragma once

#include <cmath>

namespace pld {

// Forward-mode scalar: value plus one tangent component. Running the
// network's backward pass in Dual arithmetic with parameter tangents set to a
// vector v yields, in the tangent slot of the input gradient, the
// mixed-derivative contraction d/dP (v . dL/dtheta) without finite
// differences.
struct Dual {
    double v = 0.0;  // value
    double t = 0.0;  // tangent

    Dual() = default;
    Dual(double value) : v(value) {}  // implicit: plain constants carry zero tangent
    Dual(double value, double tangent) : v(value), t(tangent) {}

    Dual& operator+=(const Dual& o) {
        v += o.v;
        t += o.t;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        t -= o.t;
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        t = t * o.v + v * o.t;
        v *= o.v;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.t}; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.v;
    return {a.v * inv, (a.t - a.v * b.t * inv) * inv};
}

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }

inline Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return {e, e * a.t};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.t / a.v}; }
inline Dual sqrt(const Dual& a) {
    const double s = std::sqrt(a.v);
    return {s, 0.5 * a.t / s};
}

// uniform accessors so templated code can branch on scalar values
inline double scalar_value(double x) { return x; }
inline double scalar_value(const Dual& x) { return x.v; }

}  // namespace pld

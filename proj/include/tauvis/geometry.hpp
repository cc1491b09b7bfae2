#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tauvis {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input (files, configs, parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A quantity that is mathematically undefined at the given arguments.
class DomainError : public Error {
public:
    using Error::Error;
};

struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr bool operator==(const Vec2&) const = default;

    [[nodiscard]] constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    /// z-component of the 3D cross product; positive when `o` is counter-clockwise of *this.
    [[nodiscard]] constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline Vec2 heading_vector(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

/// Distance from point p to the closed segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

/// True iff the open segment (p, q) touches the closed segment [a, b].
///
/// Endpoints p and q themselves are excluded so that a point lying exactly on a
/// wall does not count as being occluded by that wall.
inline bool open_segment_hits(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b,
                              double eps = 1e-12) {
    const Vec2 r = q - p;
    const Vec2 s = b - a;
    const double denom = r.cross(s);
    const Vec2 ap = a - p;
    if (std::abs(denom) <= eps * r.norm() * s.norm()) {
        // Parallel. Only collinear overlap counts.
        if (std::abs(ap.cross(r)) > eps * std::max(1.0, r.norm() * ap.norm())) return false;
        const double rr = r.dot(r);
        if (rr == 0.0) return false;
        double t0 = ap.dot(r) / rr;
        double t1 = (b - p).dot(r) / rr;
        if (t0 > t1) std::swap(t0, t1);
        return t1 > eps && t0 < 1.0 - eps;
    }
    const double t = ap.cross(s) / denom;  // along p->q
    const double u = ap.cross(r) / denom;  // along a->b
    return t > eps && t < 1.0 - eps && u >= -eps && u <= 1.0 + eps;
}

}  // namespace tauvis

#pragma once

#include <cmath>
#include <string>

#include "geometry.hpp"

namespace tauvis {

/// Planar unicycle pose plus forward speed.
struct VehicleState {
    double x{0.0};      ///< [m]
    double y{0.0};      ///< [m]
    double theta{0.0};  ///< heading [rad], kept in (-pi, pi]
    double v{0.0};      ///< forward speed [m/s]

    [[nodiscard]] Vec2 position() const { return {x, y}; }
    [[nodiscard]] bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) && std::isfinite(v);
    }
    bool operator==(const VehicleState&) const = default;
};

struct ControlCommand {
    double u{0.0};  ///< turning rate [rad/s]
    double v{0.0};  ///< forward speed [m/s]
};

/// Default integration substep for the unicycle model.
inline constexpr double kDefaultIntegrationStep = 0.01;

/// One classical RK4 step of x' = v cos(theta), y' = v sin(theta), theta' = u.
/// The heading is left unnormalized so that step sequences stay smooth.
inline VehicleState rk4_step(const VehicleState& s, double u, double v, double h) {
    auto deriv = [&](double theta) { return Vec2{v * std::cos(theta), v * std::sin(theta)}; };
    const Vec2 k1 = deriv(s.theta);
    const Vec2 k2 = deriv(s.theta + 0.5 * h * u);
    const Vec2 k3 = k2;  // theta' does not depend on position, so k3 == k2
    const Vec2 k4 = deriv(s.theta + h * u);
    const Vec2 d = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    return {s.x + d.x, s.y + d.y, s.theta + h * u, v};
}

/// Integrates the unicycle over `dt` with (u, v) held constant, using RK4
/// substeps no longer than `max_substep`.
inline VehicleState step(const VehicleState& state, const ControlCommand& cmd, double dt,
                         double max_substep = kDefaultIntegrationStep) {
    if (!state.finite() || !std::isfinite(cmd.u) || !std::isfinite(cmd.v) || !std::isfinite(dt))
        throw DomainError("vehicle step: non-finite input");
    if (!(dt > 0.0)) throw DomainError("vehicle step: dt must be > 0");
    if (cmd.v < 0.0) throw DomainError("vehicle step: negative speed");
    if (cmd.u == 0.0) {
        // RK4 is exact on straight segments; one closed-form step avoids round-off.
        return {state.x + cmd.v * dt * std::cos(state.theta),
                state.y + cmd.v * dt * std::sin(state.theta), normalize_angle(state.theta), cmd.v};
    }
    const auto n = static_cast<long>(std::ceil(dt / max_substep - 1e-9));
    const double h = dt / static_cast<double>(std::max(1L, n));
    VehicleState s = state;
    for (long i = 0; i < std::max(1L, n); ++i) s = rk4_step(s, cmd.u, cmd.v, h);
    s.theta = normalize_angle(s.theta);
    return s;
}

/// Closed-form constant-twist solution of the unicycle model.
inline VehicleState exact_arc(const VehicleState& s, double u, double v, double dt) {
    VehicleState out = s;
    out.v = v;
    if (u == 0.0) {
        out.x = s.x + v * dt * std::cos(s.theta);
        out.y = s.y + v * dt * std::sin(s.theta);
        out.theta = normalize_angle(s.theta);
        return out;
    }
    const double th1 = s.theta + u * dt;
    out.x = s.x + v / u * (std::sin(th1) - std::sin(s.theta));
    out.y = s.y - v / u * (std::cos(th1) - std::cos(s.theta));
    out.theta = normalize_angle(th1);
    return out;
}

}  // namespace tauvis

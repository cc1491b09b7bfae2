#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>

#include "tau.hpp"

namespace tauvis {

struct GainConfig {
    double k_f{0.9};     ///< outer-band tau-balancing gain
    double k_m{0.01};    ///< inner-band tau-balancing gain
    double k{0.6};       ///< single-wall gain
    double c{1.92};      ///< single-wall tau setpoint [s]
    double k_kong{1.0};  ///< derivative-maximization gain
    double u_max{1.5};   ///< turning-rate clamp [rad/s]

    void validate() const {
        if (!(k_f > 0.0)) throw ConfigError("gains.k_f: must be > 0");
        if (!(k_m > 0.0)) throw ConfigError("gains.k_m: must be > 0");
        if (!(k > 0.0)) throw ConfigError("gains.k: must be > 0");
        if (!(c > 0.0)) throw ConfigError("gains.c: must be > 0");
        if (!(k_kong > 0.0)) throw ConfigError("gains.k_kong: must be > 0");
        if (!(u_max > 0.0)) throw ConfigError("gains.u_max: must be > 0");
    }
};

/// Speeds and open-loop primitives used by select_controller.
struct BehaviorConfig {
    double v_cruise{1.0};   ///< [m/s]
    double v_turn{0.5};     ///< speed while executing a turn primitive [m/s]
    double v_blind{0.3};    ///< speed when nothing is perceived [m/s]
    double turn_rate{0.8};  ///< turn primitive magnitude [rad/s]
    Roi single_wall_left_roi{Roi::FarLeft};
    Roi single_wall_right_roi{Roi::FarRight};

    void validate() const {
        if (!(v_cruise > 0.0) || !(v_turn > 0.0) || !(v_blind >= 0.0))
            throw ConfigError("behavior: speeds must be positive");
        if (!(turn_rate > 0.0)) throw ConfigError("behavior.turn_rate: must be > 0");
    }
};

enum class WallSide { Left, Right };

inline double clamp_turn(double u, double u_max) { return std::clamp(u, -u_max, u_max); }

/// u = k_f (tau_fl - tau_fr) + k_m (tau_l - tau_r), clamped. Empty when any of
/// the four lateral fields is invalid.
inline std::optional<double> tau_balancing(const RoiSummary& s, const GainConfig& g) {
    if (!s.fl() || !s.fr() || !s.l() || !s.r()) return std::nullopt;
    const double u = g.k_f * (*s.fl() - *s.fr()) + g.k_m * (*s.l() - *s.r());
    return clamp_turn(u, g.u_max);
}

/// u = +k (tau_x - c) for a wall on the left, -k (tau_x - c) on the right.
inline std::optional<double> single_wall(const RoiSummary& s, WallSide side, Roi field,
                                         const GainConfig& g) {
    const auto& tau = s[field];
    if (!tau) return std::nullopt;
    const double e = g.k * (*tau - g.c);
    return clamp_turn(side == WallSide::Left ? e : -e, g.u_max);
}

/// Setpoint c that places the single-wall rest point at lateral offset
/// `x_desired` from the centerline, for band boundary slope f = tan(phi).
inline double single_wall_setpoint(double f, double half_width, double x_desired = 0.0) {
    return f * (x_desired + half_width + 1.0);
}

/// One timestamped tau observation of a single feature.
struct TauObservation {
    double t{0.0};
    double tau{0.0};
};

/// u = k [tau_2' - tau_1'] with backward differences over the last two
/// observations of each series.
inline std::optional<double> kong_derivative_law(std::span<const TauObservation> tau1,
                                                 std::span<const TauObservation> tau2,
                                                 const GainConfig& g) {
    if (tau1.size() < 2 || tau2.size() < 2) return std::nullopt;
    auto rate = [](std::span<const TauObservation> s) -> std::optional<double> {
        const auto& a = s[s.size() - 2];
        const auto& b = s[s.size() - 1];
        if (!(b.t > a.t)) return std::nullopt;
        return (b.tau - a.tau) / (b.t - a.t);
    };
    const auto d1 = rate(tau1);
    const auto d2 = rate(tau2);
    if (!d1 || !d2) return std::nullopt;
    return clamp_turn(g.k_kong * (*d2 - *d1), g.u_max);
}

/// Dispatches to the steering law for a scene mode. Total: falls back to
/// partial tau balancing (then straight) when perception is insufficient.
inline ControlCommand select_controller(SceneMode mode, const RoiSummary& s, const GainConfig& g,
                                        const BehaviorConfig& b) {
    switch (mode) {
        case SceneMode::Corridor: {
            if (auto u = tau_balancing(s, g)) return {*u, b.v_cruise};
            double u = 0.0;
            if (s.fl() && s.fr()) u += g.k_f * (*s.fl() - *s.fr());
            if (s.l() && s.r()) u += g.k_m * (*s.l() - *s.r());
            return {clamp_turn(u, g.u_max), b.v_cruise};
        }
        case SceneMode::SingleWallLeft: {
            auto u = single_wall(s, WallSide::Left, b.single_wall_left_roi, g);
            if (!u) u = single_wall(s, WallSide::Left, Roi::Left, g);
            return {u.value_or(0.0), b.v_cruise};
        }
        case SceneMode::SingleWallRight: {
            auto u = single_wall(s, WallSide::Right, b.single_wall_right_roi, g);
            if (!u) u = single_wall(s, WallSide::Right, Roi::Right, g);
            return {u.value_or(0.0), b.v_cruise};
        }
        case SceneMode::TurnLeft: return {clamp_turn(b.turn_rate, g.u_max), b.v_turn};
        case SceneMode::TurnRight: return {clamp_turn(-b.turn_rate, g.u_max), b.v_turn};
        case SceneMode::Blind: return {0.0, b.v_blind};
    }
    return {0.0, b.v_blind};
}

// ---------------------------------------------------------------------------
// Sense-act interleaving

enum class Phase { Sense, Act };

inline constexpr std::string_view to_string(Phase p) { return p == Phase::Sense ? "sense" : "act"; }

struct SenseActSchedule {
    double sense_duration{0.4};
    double act_duration{0.25};
    double origin{0.0};

    [[nodiscard]] double period() const { return sense_duration + act_duration; }

    void validate() const {
        if (!(sense_duration > 0.0) || !(act_duration > 0.0))
            throw ConfigError("schedule: sense and act durations must be > 0");
    }

    /// Time since the start of the current cycle, robust to round-off at
    /// cycle boundaries.
    [[nodiscard]] double cycle_time(double t) const {
        constexpr double eps = 1e-9;
        const double rel = t - origin;
        const double n = std::floor(rel / period() + eps);
        return std::max(0.0, rel - n * period());
    }

    [[nodiscard]] Phase phase_at(double t) const {
        return cycle_time(t) < sense_duration - 1e-9 ? Phase::Sense : Phase::Act;
    }

    /// First phase boundary strictly after t.
    [[nodiscard]] double next_boundary(double t) const {
        const double ct = cycle_time(t);
        const double start = t - ct;
        return ct < sense_duration - 1e-9 ? start + sense_duration : start + period();
    }
};

struct GatedCommand {
    double u{0.0};
    Phase phase{Phase::Sense};
};

/// Zero turning during Sense; the held command during Act.
inline GatedCommand sense_act_gate(double t, const SenseActSchedule& sched, double u_held) {
    const Phase p = sched.phase_at(t);
    return {p == Phase::Sense ? 0.0 : u_held, p};
}

}  // namespace tauvis

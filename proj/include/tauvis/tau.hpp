#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "camera.hpp"
#include "vehicle.hpp"

namespace tauvis {

// ---------------------------------------------------------------------------
// Closed-form time-to-transit

/// Time until the vehicle crosses the line through `feature` perpendicular to
/// its heading, at constant speed and heading. Negative once transit has passed.
inline double geometric_tau(const VehicleState& s, const Vec2& feature) {
    if (s.v == 0.0) throw DomainError("geometric tau undefined at zero speed");
    return (std::cos(s.theta) * (feature.x - s.x) + std::sin(s.theta) * (feature.y - s.y)) / s.v;
}

/// Time-to-transit perceived by a camera whose optical axis is rotated by
/// `phi` from the heading, under pure translation.
inline double general_tau(const VehicleState& s, double phi, const Vec2& feature) {
    if (s.v == 0.0) throw DomainError("general tau undefined at zero speed");
    const double dx = feature.x - s.x;
    const double dy = feature.y - s.y;
    const double a = s.theta + phi;
    const double lateral = dx * std::sin(a) - dy * std::cos(a);
    const double depth = dx * std::cos(a) + dy * std::sin(a);
    const double transit = std::sin(s.theta) * dx - std::cos(s.theta) * dy;
    if (std::abs(transit) <= 1e-12 * std::max(1.0, std::hypot(dx, dy)))
        throw DomainError("transit line degenerate: feature on the heading line");
    return lateral * depth / (s.v * transit);
}

/// Perceived tau along the straight run (0, t, pi/2) at unit speed, expanded as
/// a trigonometric polynomial in t.
inline double perceived_tau_expansion(double t, double phi, double x_f, double y_f) {
    if (x_f == 0.0) throw DomainError("perceived tau expansion: x_f must be nonzero");
    const double s = std::sin(phi);
    const double c = std::cos(phi);
    return t * t * s * c / x_f + t * (-2.0 * y_f * s * c / x_f + s * s - c * c) +
           y_f * y_f * s * c / x_f - x_f * s * c - y_f * s * s + y_f * c * c;
}

/// First-order-in-phi truncation of perceived_tau_expansion.
inline double perceived_tau_first_order(double t, double phi, double x_f, double y_f) {
    const double remaining = y_f - t;
    return remaining + phi / x_f * remaining * remaining - phi * x_f;
}

// ---------------------------------------------------------------------------
// Perceived tau from image tracks

inline constexpr double kDefaultVelocityFloor = 1.0;  // px/s

/// |r| / |r_dot| for one track, or empty when the flow is below `velocity_floor`.
inline std::optional<double> perceived_tau(const Track& t,
                                           double velocity_floor = kDefaultVelocityFloor) {
    const double speed = std::hypot(t.vel_u, t.vel_v);
    if (!(speed > velocity_floor)) return std::nullopt;
    return std::hypot(t.u_px, t.v_px) / speed;
}

/// Outward (expanding) flow relative to the principal point.
inline bool is_expanding(const Track& t) { return t.u_px * t.vel_u + t.v_px * t.vel_v > 0.0; }

enum class Roi : int { FarLeft = 0, Left = 1, Center = 2, Right = 3, FarRight = 4 };
inline constexpr std::size_t kRoiCount = 5;

enum class RoiStatistic { Mean, Median };

struct RoiConfig {
    std::array<double, kRoiCount> band_fractions{0.2, 0.2, 0.2, 0.2, 0.2};
    int min_features_per_roi{2};
    double tau_max{50.0};
    double velocity_floor{kDefaultVelocityFloor};
    bool drop_contracting{true};
    RoiStatistic statistic{RoiStatistic::Mean};

    void validate(const CameraConfig& cam) const {
        double sum = 0.0;
        for (double f : band_fractions) {
            if (!(f > 0.0)) throw ConfigError("roi.band_fractions: must be positive");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("roi.band_fractions: must sum to 1");
        if (min_features_per_roi < 1) throw ConfigError("roi.min_features_per_roi: must be >= 1");
        if (!(tau_max > 0.0)) throw ConfigError("roi.tau_max: must be > 0");
        if (!(velocity_floor >= 0.0)) throw ConfigError("roi.velocity_floor: must be >= 0");
        const auto [phi1, phi2] = boundary_angles(cam);
        if (!(0.0 < phi2 && phi2 < phi1 && phi1 < 0.5 * cam.hfov()))
            throw ConfigError("roi.band_fractions: boundary angles must satisfy 0 < phi2 < phi1 < hfov/2");
    }

    /// The four band edges in pixels, left to right.
    [[nodiscard]] std::array<double, kRoiCount - 1> edges_px(const CameraConfig& cam) const {
        std::array<double, kRoiCount - 1> e{};
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < kRoiCount; ++i) {
            acc += band_fractions[i];
            e[i] = -0.5 * cam.width_px + acc * cam.width_px;
        }
        return e;
    }

    [[nodiscard]] int roi_index(double u_px, const CameraConfig& cam) const {
        const auto e = edges_px(cam);
        int i = 0;
        while (i < static_cast<int>(e.size()) && u_px >= e[static_cast<std::size_t>(i)]) ++i;
        return i;
    }

    /// Bearing angles (phi1, phi2) of the outer and inner band boundaries,
    /// averaged over the left and right halves of the image.
    [[nodiscard]] std::pair<double, double> boundary_angles(const CameraConfig& cam) const {
        const auto e = edges_px(cam);
        const double outer = 0.5 * (std::abs(e[0]) + std::abs(e[3]));
        const double inner = 0.5 * (std::abs(e[1]) + std::abs(e[2]));
        return {std::atan(outer / cam.focal_px), std::atan(inner / cam.focal_px)};
    }
};

struct TauSample {
    std::int64_t feature_id{0};
    double tau{0.0};
    double image_u{0.0};
    int roi_index{0};
};

/// Why a track did not produce a TauSample.
struct TauRejections {
    int below_floor{0};
    int contracting{0};
    int above_tau_max{0};
};

/// Converts tracks into ROI-tagged tau samples, applying the floor, contraction
/// and tau_max rules from `cfg`.
inline std::vector<TauSample> tau_samples(std::span<const Track> tracks, const CameraConfig& cam,
                                          const RoiConfig& cfg, TauRejections* rejected = nullptr) {
    std::vector<TauSample> out;
    out.reserve(tracks.size());
    for (const auto& t : tracks) {
        const auto tau = perceived_tau(t, cfg.velocity_floor);
        if (!tau) {
            if (rejected) ++rejected->below_floor;
            continue;
        }
        if (cfg.drop_contracting && !is_expanding(t)) {
            if (rejected) ++rejected->contracting;
            continue;
        }
        if (*tau > cfg.tau_max) {
            if (rejected) ++rejected->above_tau_max;
            continue;
        }
        out.push_back({t.feature_id, *tau, t.u_px, cfg.roi_index(t.u_px, cam)});
    }
    return out;
}

struct RoiSummary {
    std::array<std::optional<double>, kRoiCount> tau{};
    std::array<int, kRoiCount> counts{};
    double timestamp{0.0};

    [[nodiscard]] const std::optional<double>& operator[](Roi r) const {
        return tau[static_cast<std::size_t>(r)];
    }
    [[nodiscard]] const std::optional<double>& fl() const { return (*this)[Roi::FarLeft]; }
    [[nodiscard]] const std::optional<double>& l() const { return (*this)[Roi::Left]; }
    [[nodiscard]] const std::optional<double>& c() const { return (*this)[Roi::Center]; }
    [[nodiscard]] const std::optional<double>& r() const { return (*this)[Roi::Right]; }
    [[nodiscard]] const std::optional<double>& fr() const { return (*this)[Roi::FarRight]; }

    [[nodiscard]] bool left_valid() const { return fl().has_value() || l().has_value(); }
    [[nodiscard]] bool right_valid() const { return fr().has_value() || r().has_value(); }
    [[nodiscard]] bool any_valid() const {
        return std::any_of(tau.begin(), tau.end(), [](const auto& t) { return t.has_value(); });
    }

    /// Left/right mirror image of this summary.
    [[nodiscard]] RoiSummary mirrored() const {
        RoiSummary m = *this;
        std::reverse(m.tau.begin(), m.tau.end());
        std::reverse(m.counts.begin(), m.counts.end());
        return m;
    }
};

/// Per-ROI average of tau. A field is valid iff at least
/// `min_features_per_roi` samples survive the tau_max cut.
inline RoiSummary aggregate_rois(std::span<const TauSample> samples, const RoiConfig& cfg,
                                 double timestamp = 0.0) {
    std::array<std::vector<double>, kRoiCount> bins;
    for (const auto& s : samples) {
        if (s.roi_index < 0 || s.roi_index >= static_cast<int>(kRoiCount)) continue;
        if (!(s.tau > 0.0) || s.tau > cfg.tau_max) continue;
        bins[static_cast<std::size_t>(s.roi_index)].push_back(s.tau);
    }
    RoiSummary out;
    out.timestamp = timestamp;
    for (std::size_t i = 0; i < kRoiCount; ++i) {
        auto& b = bins[i];
        out.counts[i] = static_cast<int>(b.size());
        if (b.empty() || out.counts[i] < cfg.min_features_per_roi) continue;
        // Sorting makes the sum independent of sample order.
        std::sort(b.begin(), b.end());
        if (cfg.statistic == RoiStatistic::Median) {
            const std::size_t n = b.size();
            out.tau[i] = n % 2 ? b[n / 2] : 0.5 * (b[n / 2 - 1] + b[n / 2]);
        } else {
            out.tau[i] = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene mode

enum class SceneMode { Corridor, TurnLeft, TurnRight, SingleWallLeft, SingleWallRight, Blind };

inline constexpr std::string_view to_string(SceneMode m) {
    switch (m) {
        case SceneMode::Corridor: return "corridor";
        case SceneMode::TurnLeft: return "turn_left";
        case SceneMode::TurnRight: return "turn_right";
        case SceneMode::SingleWallLeft: return "single_wall_left";
        case SceneMode::SingleWallRight: return "single_wall_right";
        case SceneMode::Blind: return "blind";
    }
    return "unknown";
}

inline std::optional<SceneMode> scene_mode_from_string(std::string_view s) {
    for (auto m : {SceneMode::Corridor, SceneMode::TurnLeft, SceneMode::TurnRight,
                   SceneMode::SingleWallLeft, SceneMode::SingleWallRight, SceneMode::Blind})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

inline bool is_turn(SceneMode m) { return m == SceneMode::TurnLeft || m == SceneMode::TurnRight; }

struct SceneModeConfig {
    double jump_threshold{0.5};  ///< relative change between consecutive summaries
    double tau_turn{4.0};        ///< "small" central tau [s]
    double imbalance_ratio{2.0}; ///< left/right mean-tau ratio counted as unbalanced
    int hysteresis{3};           ///< consecutive agreeing detections before a switch
    std::size_t window{6};       ///< summaries inspected by detect_scene_mode
};

namespace detail {

inline std::optional<double> side_mean(const std::optional<double>& a,
                                       const std::optional<double>& b) {
    if (a && b) return 0.5 * (*a + *b);
    if (a) return a;
    return b;
}

inline bool jumped(const std::optional<double>& before, const std::optional<double>& after,
                   double threshold) {
    if (!before || !after) return false;
    return std::abs(*after - *before) > threshold * std::min(*before, *after);
}

}  // namespace detail

/// Classifies the scene from recent ROI summaries (oldest first).
///
/// Blind when the newest summary has no valid field. A turn needs a small
/// central tau together with either a jump in some lateral field inside the
/// window or an unbalanced left/right field; the turn goes toward the side
/// that looks more open (missing or larger tau). SingleWall when one side is
/// valid and the other invalid across the whole window. Otherwise Corridor.
inline SceneMode detect_scene_mode(std::span<const RoiSummary> history,
                                   const SceneModeConfig& cfg = {}) {
    if (history.empty()) return SceneMode::Blind;
    const std::size_t n = std::min(history.size(), std::max<std::size_t>(cfg.window, 2));
    const auto recent = history.subspan(history.size() - n);
    const RoiSummary& now = recent.back();
    if (!now.any_valid()) return SceneMode::Blind;

    const auto left = detail::side_mean(now.fl(), now.l());
    const auto right = detail::side_mean(now.fr(), now.r());

    if (now.c() && *now.c() < cfg.tau_turn) {
        bool discontinuity = false;
        for (std::size_t i = 1; i < recent.size(); ++i)
            for (auto roi : {Roi::FarLeft, Roi::Left, Roi::Right, Roi::FarRight})
                discontinuity |= detail::jumped(recent[i - 1][roi], recent[i][roi], cfg.jump_threshold);
        const bool unbalanced = !left || !right ||
                                std::max(*left, *right) > cfg.imbalance_ratio * std::min(*left, *right);
        if (discontinuity || unbalanced) {
            if (!left && !right) return SceneMode::TurnLeft;
            if (!left) return SceneMode::TurnLeft;
            if (!right) return SceneMode::TurnRight;
            return *left >= *right ? SceneMode::TurnLeft : SceneMode::TurnRight;
        }
    }

    const bool all_left_only = std::all_of(recent.begin(), recent.end(), [](const RoiSummary& s) {
        return s.left_valid() && !s.right_valid();
    });
    if (all_left_only) return SceneMode::SingleWallLeft;
    const bool all_right_only = std::all_of(recent.begin(), recent.end(), [](const RoiSummary& s) {
        return s.right_valid() && !s.left_valid();
    });
    if (all_right_only) return SceneMode::SingleWallRight;
    return SceneMode::Corridor;
}

/// Applies switching hysteresis to raw scene-mode detections.
class ModeFilter {
public:
    explicit ModeFilter(int hysteresis = 3, SceneMode initial = SceneMode::Corridor)
        : hysteresis_(std::max(1, hysteresis)), current_(initial), candidate_(initial) {}

    /// Feeds one raw detection; returns true when the filtered mode changed.
    bool update(SceneMode raw) {
        if (raw == current_) {
            streak_ = 0;
            candidate_ = current_;
            return false;
        }
        if (raw == candidate_) {
            ++streak_;
        } else {
            candidate_ = raw;
            streak_ = 1;
        }
        if (streak_ >= hysteresis_) {
            current_ = raw;
            streak_ = 0;
            return true;
        }
        return false;
    }

    [[nodiscard]] SceneMode mode() const { return current_; }

private:
    int hysteresis_;
    SceneMode current_;
    SceneMode candidate_;
    int streak_{0};
};

}  // namespace tauvis

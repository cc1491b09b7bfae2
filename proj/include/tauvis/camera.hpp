#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "vehicle.hpp"
#include "world.hpp"

namespace tauvis {

/// Forward-looking pinhole camera rigidly mounted on the vehicle.
struct CameraConfig {
    double focal_px{300.0};
    double width_px{640.0};
    double height_px{480.0};
    double mount_offset_phi{0.0};  ///< optical axis = heading + phi [rad]
    double frame_rate{30.0};       ///< [Hz]
    double pixel_noise_sigma{0.5};
    std::uint64_t rng_seed{0};

    [[nodiscard]] double hfov() const { return 2.0 * std::atan(width_px / (2.0 * focal_px)); }
    [[nodiscard]] double frame_interval() const { return 1.0 / frame_rate; }

    void validate() const {
        if (!(focal_px > 0.0)) throw ConfigError("camera.focal_px: must be > 0");
        if (!(width_px > 0.0) || !(height_px > 0.0))
            throw ConfigError("camera.width_px/height_px: must be > 0");
        if (!(frame_rate > 0.0)) throw ConfigError("camera.frame_rate: must be > 0");
        if (!(pixel_noise_sigma >= 0.0))
            throw ConfigError("camera.pixel_noise_sigma: must be >= 0");
        if (!std::isfinite(mount_offset_phi) || std::abs(mount_offset_phi) >= hfov())
            throw ConfigError("camera.mount_offset_phi: out of range");
    }
};

/// Image coordinates relative to the principal point; u grows to the right,
/// v grows upward.
struct ImagePoint {
    std::int64_t feature_id{0};
    double u_px{0.0};
    double v_px{0.0};
};

struct Track {
    std::int64_t feature_id{0};
    double u_px{0.0};
    double v_px{0.0};
    double vel_u{0.0};  ///< [px/s]
    double vel_v{0.0};  ///< [px/s]
    int age{2};         ///< consecutive frames the feature has been observed
};

/// Camera-frame coordinates of a world point: depth along the optical axis and
/// lateral offset to the right of it.
struct CameraFramePoint {
    double depth{0.0};
    double lateral{0.0};
};

inline CameraFramePoint to_camera_frame(const VehicleState& s, double phi, const Vec2& p) {
    const double a = s.theta + phi;
    const Vec2 rel = p - s.position();
    return {rel.x * std::cos(a) + rel.y * std::sin(a), rel.x * std::sin(a) - rel.y * std::cos(a)};
}

/// Projects every visible feature into the image. A feature is visible when it
/// lies in front of the camera, inside the image bounds and not occluded.
inline std::vector<ImagePoint> project(const VehicleState& state, const CameraConfig& cam,
                                       const World& world) {
    std::vector<ImagePoint> out;
    const double half_w = 0.5 * cam.width_px;
    const double half_h = 0.5 * cam.height_px;
    for (const auto& f : world.features) {
        const auto cf = to_camera_frame(state, cam.mount_offset_phi, f.position);
        if (!(cf.depth > 1e-9)) continue;
        const double u = cam.focal_px * cf.lateral / cf.depth;
        const double v = cam.focal_px * f.height / cf.depth;
        if (std::abs(u) > half_w || std::abs(v) > half_h) continue;
        if (!line_of_sight(world, state.position(), f)) continue;
        out.push_back({f.id, u, v});
    }
    return out;
}

/// Adds i.i.d. Gaussian pixel noise to each coordinate of each point.
inline std::vector<ImagePoint> observe(std::vector<ImagePoint> points, double sigma,
                                       std::mt19937_64& rng) {
    if (sigma <= 0.0) return points;
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& p : points) {
        p.u_px += noise(rng);
        p.v_px += noise(rng);
    }
    return points;
}

/// Pairs features seen in both frames and differences their positions over one
/// frame interval. Positions are taken as given (already observed).
inline std::vector<Track> make_tracks(const std::vector<ImagePoint>& prev,
                                      const std::vector<ImagePoint>& cur, const CameraConfig& cam) {
    std::unordered_map<std::int64_t, const ImagePoint*> by_id;
    by_id.reserve(prev.size());
    for (const auto& p : prev) by_id.emplace(p.feature_id, &p);
    const double rate = cam.frame_rate;
    std::vector<Track> tracks;
    tracks.reserve(cur.size());
    for (const auto& c : cur) {
        auto it = by_id.find(c.feature_id);
        if (it == by_id.end()) continue;
        const ImagePoint& p = *it->second;
        tracks.push_back({c.feature_id, c.u_px, c.v_px, (c.u_px - p.u_px) * rate,
                          (c.v_px - p.v_px) * rate, 2});
    }
    return tracks;
}

/// Noisy variant: both endpoints receive independent pixel noise drawn from `rng`.
inline std::vector<Track> make_tracks(const std::vector<ImagePoint>& prev,
                                      const std::vector<ImagePoint>& cur, const CameraConfig& cam,
                                      std::mt19937_64& rng) {
    const auto noisy_prev = observe(prev, cam.pixel_noise_sigma, rng);
    const auto noisy_cur = observe(cur, cam.pixel_noise_sigma, rng);
    return make_tracks(noisy_prev, noisy_cur, cam);
}

/// Frame-to-frame feature tracker with perfect id association.
///
/// Each observation is a single noisy measurement: the noise drawn for a
/// feature in frame k is reused as the previous endpoint in frame k+1.
class FeatureTracker {
public:
    explicit FeatureTracker(const CameraConfig& cam) : cam_(cam), rng_(cam.rng_seed) {}

    /// Consumes the projections of the next frame and returns the tracks that
    /// span the last two frames.
    std::vector<Track> advance(const std::vector<ImagePoint>& projected) {
        auto observed = observe(projected, cam_.pixel_noise_sigma, rng_);
        auto tracks = make_tracks(prev_, observed, cam_);
        std::unordered_map<std::int64_t, int> ages;
        ages.reserve(observed.size());
        for (const auto& p : observed) {
            auto it = ages_.find(p.feature_id);
            ages.emplace(p.feature_id, it == ages_.end() ? 1 : it->second + 1);
        }
        for (auto& t : tracks) t.age = ages[t.feature_id];
        ages_ = std::move(ages);
        prev_ = std::move(observed);
        return tracks;
    }

    [[nodiscard]] const std::vector<ImagePoint>& last_observation() const { return prev_; }

private:
    CameraConfig cam_;
    std::mt19937_64 rng_;
    std::vector<ImagePoint> prev_;
    std::unordered_map<std::int64_t, int> ages_;
};

}  // namespace tauvis

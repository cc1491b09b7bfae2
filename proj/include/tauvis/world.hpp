#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "geometry.hpp"

namespace tauvis {

struct WallSegment {
    Vec2 a;
    Vec2 b;

    [[nodiscard]] double length() const { return (b - a).norm(); }
};

struct FeaturePoint {
    std::int64_t id{0};
    Vec2 position;
    /// Index of the host wall, or empty for a free-standing feature.
    std::optional<std::size_t> wall;
    /// Height above the camera's optical plane, meters.
    double height{0.0};
};

/// Maximum distance between a wall-hosted feature and its wall.
inline constexpr double kFeatureWallTolerance = 0.01;

struct World {
    std::vector<WallSegment> walls;
    std::vector<FeaturePoint> features;
    double corridor_half_width{0.0};
    std::vector<Vec2> centerline;

    [[nodiscard]] bool has_centerline() const { return centerline.size() >= 2; }

    /// Throws ConfigError naming the first violated invariant.
    void validate() const {
        for (std::size_t i = 0; i < walls.size(); ++i) {
            const auto& w = walls[i];
            if (!w.a.finite() || !w.b.finite())
                throw ConfigError("walls[" + std::to_string(i) + "]: non-finite endpoint");
            if (w.length() == 0.0)
                throw ConfigError("walls[" + std::to_string(i) + "]: zero-length wall");
        }
        if (!std::isfinite(corridor_half_width) || corridor_half_width < 0.0)
            throw ConfigError("corridor_half_width: must be a finite number >= 0");
        if (!centerline.empty()) {
            if (centerline.size() < 2)
                throw ConfigError("centerline: needs at least two points");
            if (!(corridor_half_width > 0.0))
                throw ConfigError("corridor_half_width: must be > 0 when a centerline is present");
            for (std::size_t i = 0; i + 1 < centerline.size(); ++i)
                if ((centerline[i + 1] - centerline[i]).norm() == 0.0)
                    throw ConfigError("centerline[" + std::to_string(i + 1) + "]: repeated point");
        }
        std::unordered_set<std::int64_t> ids;
        for (std::size_t i = 0; i < features.size(); ++i) {
            const auto& f = features[i];
            const std::string where = "features[" + std::to_string(i) + "]";
            if (!ids.insert(f.id).second)
                throw ConfigError(where + ": duplicate id " + std::to_string(f.id));
            if (!f.position.finite() || !std::isfinite(f.height))
                throw ConfigError(where + ": non-finite coordinates");
            if (f.wall) {
                if (*f.wall >= walls.size())
                    throw ConfigError(where + ".wall: no wall with id " + std::to_string(*f.wall));
                const auto& w = walls[*f.wall];
                if (point_segment_distance(f.position, w.a, w.b) > kFeatureWallTolerance)
                    throw ConfigError(where + ": not on its host wall (tolerance 0.01 m)");
            }
        }
    }
};

namespace detail {

inline Vec2 json_point(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(where + ": expected [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

/// Builds a World from the JSON world schema and validates it.
inline World world_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("world: expected a JSON object");
    World w;
    if (!j.contains("walls") || !j["walls"].is_array())
        throw ConfigError("walls: missing or not an array");
    const auto& walls = j["walls"];
    for (std::size_t i = 0; i < walls.size(); ++i) {
        const std::string where = "walls[" + std::to_string(i) + "]";
        if (!walls[i].is_array() || walls[i].size() != 2)
            throw ConfigError(where + ": expected [[x1,y1],[x2,y2]]");
        w.walls.push_back({detail::json_point(walls[i][0], where + "[0]"),
                           detail::json_point(walls[i][1], where + "[1]")});
    }
    if (j.contains("features")) {
        const auto& feats = j["features"];
        if (!feats.is_array()) throw ConfigError("features: not an array");
        for (std::size_t i = 0; i < feats.size(); ++i) {
            const std::string where = "features[" + std::to_string(i) + "]";
            const auto& f = feats[i];
            if (!f.is_object()) throw ConfigError(where + ": expected an object");
            if (!f.contains("id") || !f["id"].is_number_integer())
                throw ConfigError(where + ".id: missing or not an integer");
            if (!f.contains("pos")) throw ConfigError(where + ".pos: missing");
            FeaturePoint fp;
            fp.id = f["id"].get<std::int64_t>();
            fp.position = detail::json_point(f["pos"], where + ".pos");
            if (f.contains("wall") && !f["wall"].is_null()) {
                if (!f["wall"].is_number_integer() || f["wall"].get<std::int64_t>() < 0)
                    throw ConfigError(where + ".wall: expected a wall index or null");
                fp.wall = f["wall"].get<std::size_t>();
            }
            if (f.contains("height")) {
                if (!f["height"].is_number()) throw ConfigError(where + ".height: not a number");
                fp.height = f["height"].get<double>();
            }
            w.features.push_back(fp);
        }
    }
    if (!j.contains("corridor_half_width") || !j["corridor_half_width"].is_number())
        throw ConfigError("corridor_half_width: missing or not a number");
    w.corridor_half_width = j["corridor_half_width"].get<double>();
    if (j.contains("centerline")) {
        const auto& cl = j["centerline"];
        if (!cl.is_array()) throw ConfigError("centerline: not an array");
        for (std::size_t i = 0; i < cl.size(); ++i)
            w.centerline.push_back(detail::json_point(cl[i], "centerline[" + std::to_string(i) + "]"));
    }
    w.validate();
    return w;
}

inline nlohmann::json world_to_json(const World& w) {
    nlohmann::json j;
    j["walls"] = nlohmann::json::array();
    for (const auto& s : w.walls) j["walls"].push_back({{s.a.x, s.a.y}, {s.b.x, s.b.y}});
    j["features"] = nlohmann::json::array();
    for (const auto& f : w.features) {
        nlohmann::json jf{{"id", f.id}, {"pos", {f.position.x, f.position.y}}};
        jf["wall"] = f.wall ? nlohmann::json(*f.wall) : nlohmann::json(nullptr);
        if (f.height != 0.0) jf["height"] = f.height;
        j["features"].push_back(jf);
    }
    j["corridor_half_width"] = w.corridor_half_width;
    if (!w.centerline.empty()) {
        j["centerline"] = nlohmann::json::array();
        for (const auto& p : w.centerline) j["centerline"].push_back({p.x, p.y});
    }
    return j;
}

inline World parse_world(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("world parse error: ") + e.what());
    }
    return world_from_json(j);
}

inline World load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open world file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_world(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// True iff the open segment from->to crosses no wall. `exempt_wall` is skipped
/// (the host wall of a feature never occludes that feature).
inline bool line_of_sight(const World& world, const Vec2& from, const Vec2& to,
                          std::optional<std::size_t> exempt_wall = std::nullopt) {
    for (std::size_t i = 0; i < world.walls.size(); ++i) {
        if (exempt_wall && *exempt_wall == i) continue;
        if (open_segment_hits(from, to, world.walls[i].a, world.walls[i].b)) return false;
    }
    return true;
}

inline bool line_of_sight(const World& world, const Vec2& from, const FeaturePoint& feature) {
    return line_of_sight(world, from, feature.position, feature.wall);
}

/// Projection of a point onto the centerline polyline.
struct CenterlineProjection {
    double offset{0.0};      ///< signed, positive left of the travel direction
    double arc_length{0.0};  ///< distance along the polyline to the foot point
    std::size_t segment{0};
};

inline CenterlineProjection project_on_centerline(const World& world, const Vec2& p) {
    if (!world.has_centerline()) throw DomainError("world has no centerline");
    CenterlineProjection best;
    double best_dist = std::numeric_limits<double>::infinity();
    double walked = 0.0;
    for (std::size_t i = 0; i + 1 < world.centerline.size(); ++i) {
        const Vec2 a = world.centerline[i];
        const Vec2 ab = world.centerline[i + 1] - a;
        const double len = ab.norm();
        const double t = std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0);
        const Vec2 foot = a + ab * t;
        const double dist = (p - foot).norm();
        if (dist < best_dist) {
            best_dist = dist;
            const double side = ab.cross(p - a);
            best.offset = side >= 0.0 ? dist : -dist;
            best.arc_length = walked + t * len;
            best.segment = i;
        }
        walked += len;
    }
    return best;
}

inline double centerline_offset(const World& world, const Vec2& p) {
    return project_on_centerline(world, p).offset;
}

inline double centerline_length(const World& world) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < world.centerline.size(); ++i)
        total += (world.centerline[i + 1] - world.centerline[i]).norm();
    return total;
}

/// Smallest distance from p to any wall.
inline double clearance(const World& world, const Vec2& p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& w : world.walls) d = std::min(d, point_segment_distance(p, w.a, w.b));
    return d;
}

}  // namespace tauvis

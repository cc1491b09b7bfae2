#pragma once

// JSON configuration files: episodes, tau-trace experiments, stability grids
// and sweep manifests. Relative paths resolve against the file's directory.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simulator.hpp"
#include "stability.hpp"

namespace tauvis {

namespace detail {

/// Typed access to one JSON object. Every key read is remembered so that
/// `finish()` can reject the rest.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    [[nodiscard]] const nlohmann::json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    [[nodiscard]] std::string path(const std::string& key) const {
        return where_.empty() ? key : where_ + "." + key;
    }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>()))
            throw ConfigError(path(key) + ": expected a finite number");
        out = v.get<double>();
    }

    void integer(const std::string& key, int& out) {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
        out = v.get<int>();
    }

    void seed(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            throw ConfigError(path(key) + ": expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }

    void boolean(const std::string& key, bool& out) {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
        out = v.get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.contains(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
    }

private:
    [[nodiscard]] std::string label() const { return where_.empty() ? "config" : where_; }

    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() || base_dir.empty() ? q : base_dir / q;
}

inline VehicleState read_state(const nlohmann::json& j, const std::string& where, VehicleState s) {
    ObjectReader r(j, where);
    r.number("x", s.x);
    r.number("y", s.y);
    r.number("theta", s.theta);
    r.number("v", s.v);
    r.finish();
    return s;
}

inline CameraConfig read_camera(const nlohmann::json& j, CameraConfig c) {
    ObjectReader r(j, "camera");
    r.number("focal_px", c.focal_px);
    r.number("width_px", c.width_px);
    r.number("height_px", c.height_px);
    r.number("mount_offset_phi", c.mount_offset_phi);
    r.number("frame_rate", c.frame_rate);
    r.number("pixel_noise_sigma", c.pixel_noise_sigma);
    r.finish();
    return c;
}

inline RoiConfig read_roi(const nlohmann::json& j, RoiConfig c) {
    ObjectReader r(j, "roi");
    if (r.has("band_fractions")) {
        const auto& b = r.at("band_fractions");
        if (!b.is_array() || b.size() != kRoiCount)
            throw ConfigError("roi.band_fractions: expected 5 numbers");
        for (std::size_t i = 0; i < kRoiCount; ++i) {
            if (!b[i].is_number()) throw ConfigError("roi.band_fractions: expected 5 numbers");
            c.band_fractions[i] = b[i].get<double>();
        }
    }
    r.integer("min_features_per_roi", c.min_features_per_roi);
    r.number("tau_max", c.tau_max);
    r.number("velocity_floor", c.velocity_floor);
    r.boolean("drop_contracting", c.drop_contracting);
    std::string stat;
    r.string("statistic", stat);
    if (stat == "mean") c.statistic = RoiStatistic::Mean;
    else if (stat == "median") c.statistic = RoiStatistic::Median;
    else if (!stat.empty()) throw ConfigError("roi.statistic: expected \"mean\" or \"median\"");
    r.finish();
    return c;
}

inline SceneModeConfig read_scene(const nlohmann::json& j, SceneModeConfig c) {
    ObjectReader r(j, "scene");
    r.number("jump_threshold", c.jump_threshold);
    r.number("tau_turn", c.tau_turn);
    r.number("imbalance_ratio", c.imbalance_ratio);
    r.integer("hysteresis", c.hysteresis);
    int window = static_cast<int>(c.window);
    r.integer("window", window);
    if (window < 1) throw ConfigError("scene.window: must be >= 1");
    if (c.hysteresis < 1) throw ConfigError("scene.hysteresis: must be >= 1");
    c.window = static_cast<std::size_t>(window);
    r.finish();
    return c;
}

inline Roi roi_from_string(const std::string& s, const std::string& where) {
    static constexpr std::array<std::string_view, kRoiCount> names{"fl", "l", "c", "r", "fr"};
    for (std::size_t i = 0; i < kRoiCount; ++i)
        if (names[i] == s) return static_cast<Roi>(i);
    throw ConfigError(where + ": expected one of fl, l, c, r, fr");
}

inline BehaviorConfig read_behavior(const nlohmann::json& j, BehaviorConfig c) {
    ObjectReader r(j, "behavior");
    r.number("v_cruise", c.v_cruise);
    r.number("v_turn", c.v_turn);
    r.number("v_blind", c.v_blind);
    r.number("turn_rate", c.turn_rate);
    std::string roi;
    r.string("single_wall_left_roi", roi);
    if (!roi.empty()) c.single_wall_left_roi = roi_from_string(roi, r.path("single_wall_left_roi"));
    roi.clear();
    r.string("single_wall_right_roi", roi);
    if (!roi.empty()) c.single_wall_right_roi = roi_from_string(roi, r.path("single_wall_right_roi"));
    r.finish();
    return c;
}

inline std::optional<SenseActSchedule> read_schedule(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    SenseActSchedule s;
    ObjectReader r(j, "schedule");
    r.number("sense", s.sense_duration);
    r.number("act", s.act_duration);
    r.number("origin", s.origin);
    r.finish();
    return s;
}

}  // namespace detail

/// Single-wall setpoint for the configured band: f is the tangent of the
/// outer boundary angle for the far bands and of the inner one otherwise.
inline double derived_single_wall_setpoint(const CameraConfig& cam, const RoiConfig& roi,
                                           const BehaviorConfig& b, double half_width,
                                           double x_desired) {
    const auto [phi1, phi2] = roi.boundary_angles(cam);
    const bool far = b.single_wall_left_roi == Roi::FarLeft;
    return single_wall_setpoint(std::tan(far ? phi1 : phi2), half_width, x_desired);
}

/// Builds an EpisodeConfig from its JSON form. `base_dir` anchors a relative
/// "world" path. Missing keys keep their defaults; unknown keys are errors.
/// When "gains.c" is absent it is derived from "single_wall_offset".
inline EpisodeConfig episode_config_from_json(const nlohmann::json& j,
                                              const std::filesystem::path& base_dir = {}) {
    using detail::ObjectReader;
    EpisodeConfig cfg;
    ObjectReader r(j, "");
    if (!r.has("world")) throw ConfigError("world: missing");
    const auto& w = r.at("world");
    if (w.is_string()) {
        const auto p = detail::resolve(base_dir, w.get<std::string>());
        cfg.world_path = p.string();
        cfg.world = std::make_shared<World>(load_world(cfg.world_path));
    } else if (w.is_object()) {
        try {
            cfg.world = std::make_shared<World>(world_from_json(w));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("world.") + e.what());
        }
    } else {
        throw ConfigError("world: expected a path or an inline world object");
    }
    if (r.has("initial")) cfg.initial = detail::read_state(r.at("initial"), "initial", cfg.initial);
    if (r.has("camera")) cfg.camera = detail::read_camera(r.at("camera"), cfg.camera);
    if (r.has("roi")) cfg.roi = detail::read_roi(r.at("roi"), cfg.roi);
    if (r.has("scene")) cfg.scene = detail::read_scene(r.at("scene"), cfg.scene);
    if (r.has("behavior")) cfg.behavior = detail::read_behavior(r.at("behavior"), cfg.behavior);
    if (r.has("schedule")) cfg.schedule = detail::read_schedule(r.at("schedule"));

    double x_desired = 0.0;
    r.number("single_wall_offset", x_desired);
    cfg.gains.c = derived_single_wall_setpoint(cfg.camera, cfg.roi, cfg.behavior,
                                               cfg.world->corridor_half_width, x_desired);
    if (r.has("gains")) {
        ObjectReader g(r.at("gains"), "gains");
        g.number("k_f", cfg.gains.k_f);
        g.number("k_m", cfg.gains.k_m);
        g.number("k", cfg.gains.k);
        g.number("c", cfg.gains.c);
        g.number("k_kong", cfg.gains.k_kong);
        g.number("u_max", cfg.gains.u_max);
        g.finish();
    }

    r.number("duration", cfg.duration);
    r.number("control_period", cfg.control_period);
    r.integer("substeps_per_frame", cfg.substeps_per_frame);
    r.seed("seed", cfg.seed);
    r.number("footprint_radius", cfg.footprint_radius);
    r.boolean("stop_at_goal", cfg.stop_at_goal);
    r.number("goal_tolerance", cfg.goal_tolerance);
    r.boolean("record_samples", cfg.record_samples);

    std::string controller;
    r.string("controller", controller);
    if (controller.empty() || controller == "auto") {
        cfg.controller = ControllerMode::Auto;
    } else if (controller == "off") {
        cfg.controller = ControllerMode::Off;
    } else if (auto m = scene_mode_from_string(controller)) {
        cfg.controller = ControllerMode::Fixed;
        cfg.fixed_mode = *m;
    } else {
        throw ConfigError("controller: expected \"auto\", \"off\" or a scene mode name");
    }
    std::string initial_mode;
    r.string("initial_mode", initial_mode);
    if (!initial_mode.empty()) {
        auto m = scene_mode_from_string(initial_mode);
        if (!m) throw ConfigError("initial_mode: unknown scene mode");
        cfg.initial_mode = *m;
    }
    std::string estimator;
    r.string("window_estimator", estimator);
    if (estimator == "baseline") cfg.window_estimator = WindowEstimator::Baseline;
    else if (estimator == "pooled_frames") cfg.window_estimator = WindowEstimator::PooledFrames;
    else if (!estimator.empty())
        throw ConfigError("window_estimator: expected \"baseline\" or \"pooled_frames\"");
    r.finish();

    cfg.camera.rng_seed = cfg.seed;
    cfg.validate();
    return cfg;
}

inline EpisodeConfig load_episode_config(const std::filesystem::path& path) {
    return episode_config_from_json(detail::read_json_file(path), path.parent_path());
}

inline TauTraceConfig trace_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {}) {
    using detail::ObjectReader;
    TauTraceConfig cfg;
    ObjectReader r(j, "");
    if (!r.has("world") || !r.at("world").is_string()) throw ConfigError("world: missing path");
    cfg.world = std::make_shared<World>(
        load_world(detail::resolve(base_dir, r.at("world").get<std::string>()).string()));
    if (r.has("initial")) cfg.initial = detail::read_state(r.at("initial"), "initial", cfg.initial);
    if (r.has("camera")) cfg.camera = detail::read_camera(r.at("camera"), cfg.camera);
    if (r.has("roi")) cfg.roi = detail::read_roi(r.at("roi"), cfg.roi);
    if (r.has("schedule")) {
        auto s = detail::read_schedule(r.at("schedule"));
        if (!s) throw ConfigError("schedule: the trace experiment needs a schedule");
        cfg.schedule = *s;
    }
    r.number("speed", cfg.speed);
    r.number("turn_rate", cfg.turn_rate);
    r.number("duration", cfg.duration);
    r.seed("seed", cfg.seed);
    r.finish();
    cfg.camera.validate();
    cfg.schedule.validate();
    if (!(cfg.speed > 0.0)) throw ConfigError("speed: must be > 0");
    if (!(cfg.turn_rate > 0.0)) throw ConfigError("turn_rate: must be > 0");
    if (!(cfg.duration > 0.0)) throw ConfigError("duration: must be > 0");
    if (cfg.world->features.size() != 1)
        throw ConfigError("world: the trace experiment needs exactly one feature");
    return cfg;
}

// ---------------------------------------------------------------------------
// Stability grids

struct StabilityRow {
    std::string law;  ///< "single_wall" or "tau_balance"
    StabilityParams params;
    EigenPair eigs;
    bool hurwitz{false};
    bool real_eigs{false};
    std::optional<bool> gain_condition;  ///< tau_balance only
    bool oracle_agrees{false};
};

struct StabilityGrid {
    std::vector<double> k, f, c, R_sw;
    std::vector<double> k_f, k_m, f_f, f_m, R_tb;
};

namespace detail {
inline std::vector<double> read_axis(ObjectReader& r, const std::string& key) {
    if (!r.has(key)) throw ConfigError(r.path(key) + ": missing");
    const auto& a = r.at(key);
    if (!a.is_array()) throw ConfigError(r.path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ConfigError(r.path(key) + ": expected an array of numbers");
        out.push_back(v.get<double>());
    }
    if (out.empty()) throw ConfigError(r.path(key) + ": empty");
    return out;
}
}  // namespace detail

inline StabilityGrid stability_grid_from_json(const nlohmann::json& j) {
    detail::ObjectReader r(j, "");
    StabilityGrid g;
    if (r.has("single_wall")) {
        detail::ObjectReader s(r.at("single_wall"), "single_wall");
        g.k = detail::read_axis(s, "k");
        g.f = detail::read_axis(s, "f");
        g.c = detail::read_axis(s, "c");
        g.R_sw = s.has("R") ? detail::read_axis(s, "R") : std::vector<double>{0.0};
        s.finish();
    }
    if (r.has("tau_balance")) {
        detail::ObjectReader t(r.at("tau_balance"), "tau_balance");
        g.k_f = detail::read_axis(t, "k_f");
        g.k_m = detail::read_axis(t, "k_m");
        g.f_f = detail::read_axis(t, "f_f");
        g.f_m = detail::read_axis(t, "f_m");
        g.R_tb = detail::read_axis(t, "R");
        t.finish();
    }
    r.finish();
    return g;
}

/// One row per grid point. Single-wall rows compare the closed-form
/// eigenvalues with eig2; tau-balance rows compare the published closed form.
inline std::vector<StabilityRow> evaluate_stability_grid(const StabilityGrid& g, double tol = 1e-9) {
    std::vector<StabilityRow> rows;
    for (double k : g.k)
        for (double f : g.f)
            for (double c : g.c)
                for (double R : g.R_sw) {
                    const auto lin = single_wall_linearization(k, f, c, R);
                    StabilityRow row;
                    row.law = "single_wall";
                    row.params = lin.params;
                    row.eigs = eig2(lin.matrix);
                    row.hurwitz = is_hurwitz(lin.matrix);
                    row.real_eigs = row.eigs[0].imag() == 0.0 && row.eigs[1].imag() == 0.0;
                    row.oracle_agrees = eigs_close(single_wall_eigs_closed_form(k, f, c), row.eigs, tol);
                    rows.push_back(row);
                }
    for (double kf : g.k_f)
        for (double km : g.k_m)
            for (double ff : g.f_f)
                for (double fm : g.f_m)
                    for (double R : g.R_tb) {
                        const auto lin = tau_balance_linearization(kf, km, ff, fm, R);
                        StabilityRow row;
                        row.law = "tau_balance";
                        row.params = lin.params;
                        row.eigs = eig2(lin.matrix);
                        row.hurwitz = is_hurwitz(lin.matrix);
                        const auto cond = tau_balance_real_eig_condition(kf, km, ff, fm, R);
                        row.real_eigs = cond.matrix_real;
                        row.gain_condition = cond.gain_condition;
                        row.oracle_agrees =
                            eigs_close(tau_balance_eigs_printed(kf, km, ff, fm, R), row.eigs, tol);
                        rows.push_back(row);
                    }
    return rows;
}

inline constexpr const char* kStabilityCsvHeader =
    "law,k_f,k_m,k,f_f,f_m,f,c,R,re1,im1,re2,im2,hurwitz,real_eigs,gain_condition,oracle_agrees";

inline std::string stability_csv(const std::vector<StabilityRow>& rows) {
    using detail::fmt_num;
    std::ostringstream os;
    os << kStabilityCsvHeader << '\n';
    for (const auto& r : rows) {
        const auto& p = r.params;
        os << r.law << ',' << fmt_num(p.k_f) << ',' << fmt_num(p.k_m) << ',' << fmt_num(p.k) << ','
           << fmt_num(p.f_f) << ',' << fmt_num(p.f_m) << ',' << fmt_num(p.f) << ',' << fmt_num(p.c)
           << ',' << fmt_num(p.R) << ',' << fmt_num(r.eigs[0].real()) << ','
           << fmt_num(r.eigs[0].imag()) << ',' << fmt_num(r.eigs[1].real()) << ','
           << fmt_num(r.eigs[1].imag()) << ',' << (r.hurwitz ? "true" : "false") << ','
           << (r.real_eigs ? "true" : "false") << ','
           << (r.gain_condition ? (*r.gain_condition ? "true" : "false") : "") << ','
           << (r.oracle_agrees ? "true" : "false") << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Sweep manifests

/// A base episode config plus axes of overrides. Axis keys are dotted paths
/// into the episode JSON ("gains.k_f", "initial.x").
struct SweepManifest {
    nlohmann::json base;
    std::filesystem::path base_dir;
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
    std::uint64_t seed{0};
    int seeds{1};
    unsigned threads{0};
};

struct SweepJob {
    std::size_t index{0};
    std::size_t grid_point{0};
    std::uint64_t seed{0};
    nlohmann::json overrides;  ///< dotted key -> value
    nlohmann::json config;
};

inline SweepManifest sweep_manifest_from_json(const nlohmann::json& j,
                                              const std::filesystem::path& base_dir) {
    detail::ObjectReader r(j, "");
    SweepManifest m;
    if (!r.has("base")) throw ConfigError("base: missing");
    const auto& b = r.at("base");
    if (b.is_string()) {
        const auto p = detail::resolve(base_dir, b.get<std::string>());
        m.base = detail::read_json_file(p);
        m.base_dir = p.parent_path();
    } else if (b.is_object()) {
        m.base = b;
        m.base_dir = base_dir;
    } else {
        throw ConfigError("base: expected a path or an episode config object");
    }
    if (!r.has("grid") || !r.at("grid").is_object()) throw ConfigError("grid: missing or not an object");
    for (const auto& [key, values] : r.at("grid").items()) {
        if (!values.is_array()) throw ConfigError("grid." + key + ": expected an array");
        m.axes.emplace_back(key, std::vector<nlohmann::json>(values.begin(), values.end()));
    }
    r.seed("seed", m.seed);
    r.integer("seeds", m.seeds);
    int threads = 0;
    r.integer("threads", threads);
    r.finish();
    if (m.axes.empty()) throw ConfigError("grid: empty");
    for (const auto& [key, values] : m.axes)
        if (values.empty()) throw ConfigError("grid." + key + ": empty");
    if (m.seeds < 1) throw ConfigError("seeds: must be >= 1");
    if (threads < 0) throw ConfigError("threads: must be >= 0");
    m.threads = static_cast<unsigned>(threads);
    return m;
}

inline SweepManifest load_sweep_manifest(const std::filesystem::path& path) {
    return sweep_manifest_from_json(detail::read_json_file(path), path.parent_path());
}

/// Cartesian product of the axes (last axis fastest) times the seed list.
/// Episode i gets seed = manifest seed + i.
inline std::vector<SweepJob> expand_sweep(const SweepManifest& m) {
    std::size_t points = 1;
    for (const auto& a : m.axes) points *= a.second.size();
    std::vector<SweepJob> jobs;
    for (std::size_t p = 0; p < points; ++p) {
        nlohmann::json overrides = nlohmann::json::object();
        nlohmann::json cfg = m.base;
        std::size_t rem = p;
        for (std::size_t ai = m.axes.size(); ai-- > 0;) {
            const auto& [key, values] = m.axes[ai];
            const auto& v = values[rem % values.size()];
            rem /= values.size();
            overrides[key] = v;
            std::string ptr = "/" + key;
            std::replace(ptr.begin(), ptr.end(), '.', '/');
            cfg[nlohmann::json::json_pointer(ptr)] = v;
        }
        for (int s = 0; s < m.seeds; ++s) {
            SweepJob job;
            job.index = jobs.size();
            job.grid_point = p;
            job.seed = m.seed + job.index;
            job.overrides = overrides;
            job.config = cfg;
            job.config["seed"] = job.seed;
            jobs.push_back(std::move(job));
        }
    }
    return jobs;
}

}  // namespace tauvis

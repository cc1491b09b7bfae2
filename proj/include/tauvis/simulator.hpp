#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "camera.hpp"
#include "control.hpp"
#include "tau.hpp"
#include "vehicle.hpp"
#include "world.hpp"

namespace tauvis {

/// Who decides the steering law during an episode.
enum class ControllerMode {
    Auto,   ///< scene-mode detection picks the law
    Fixed,  ///< always use `fixed_mode`
    Off,    ///< u = 0 at cruise speed
};

/// How the per-ROI controller input is formed from a sense window.
enum class WindowEstimator {
    /// Pool the per-frame tau samples of the window and average them.
    PooledFrames,
    /// One tau per feature from its displacement across the whole window.
    Baseline,
};

struct EpisodeConfig {
    std::shared_ptr<const World> world;
    std::string world_path;
    VehicleState initial{0.0, 0.0, std::numbers::pi / 2.0, 1.0};
    CameraConfig camera;
    RoiConfig roi;
    SceneModeConfig scene;
    GainConfig gains;
    BehaviorConfig behavior;
    std::optional<SenseActSchedule> schedule;
    double duration{30.0};
    double control_period{0.0};  ///< 0 means one camera frame interval
    int substeps_per_frame{3};
    std::uint64_t seed{0};
    double footprint_radius{0.25};
    ControllerMode controller{ControllerMode::Auto};
    SceneMode fixed_mode{SceneMode::Corridor};
    SceneMode initial_mode{SceneMode::Corridor};
    WindowEstimator window_estimator{WindowEstimator::Baseline};
    bool stop_at_goal{true};
    double goal_tolerance{0.5};
    bool record_samples{true};

    [[nodiscard]] int frames_per_control() const {
        const double fi = camera.frame_interval();
        const double p = control_period > 0.0 ? control_period : fi;
        return std::max(1, static_cast<int>(std::lround(p / fi)));
    }

    void validate() const {
        if (!world) throw ConfigError("world: not loaded");
        camera.validate();
        roi.validate(camera);
        gains.validate();
        behavior.validate();
        if (schedule) schedule->validate();
        if (!(duration > 0.0)) throw ConfigError("duration: must be > 0");
        if (control_period < 0.0) throw ConfigError("control_period: must be >= 0");
        if (control_period > 0.0) {
            const double ratio = control_period / camera.frame_interval();
            if (std::abs(ratio - std::round(ratio)) > 1e-6 || std::round(ratio) < 1.0)
                throw ConfigError("control_period: must be a multiple of the camera frame interval");
        }
        if (substeps_per_frame < 1) throw ConfigError("substeps_per_frame: must be >= 1");
        if (!(footprint_radius > 0.0)) throw ConfigError("footprint_radius: must be > 0");
        if (!initial.finite() || initial.v < 0.0) throw ConfigError("initial_state: invalid");
    }
};

enum class PhaseTag { Sense, Act, Continuous };

inline constexpr std::string_view to_string(PhaseTag p) {
    switch (p) {
        case PhaseTag::Sense: return "sense";
        case PhaseTag::Act: return "act";
        case PhaseTag::Continuous: return "continuous";
    }
    return "unknown";
}

struct TickRecord {
    double t{0.0};
    VehicleState state;
    ControlCommand command;  ///< applied from t onward
    PhaseTag phase{PhaseTag::Continuous};
    SceneMode mode{SceneMode::Corridor};
    std::optional<RoiSummary> summary;  ///< controller input in effect
    std::optional<double> offset;
};

struct FrameRecord {
    double t{0.0};
    bool trusted{false};
    std::optional<RoiSummary> summary;
    std::vector<TauSample> samples;
};

struct EpisodeEvent {
    double t{0.0};
    std::string kind;  ///< "mode_switch", "latch", "collision", "goal"
    std::string detail;
};

struct EpisodeLog {
    std::vector<TickRecord> ticks;
    std::vector<FrameRecord> frames;
    std::vector<EpisodeEvent> events;
    TauRejections rejections;
    bool collided{false};
    bool reached_goal{false};
};

namespace detail {

/// Per-feature first/last observation inside one sense window.
struct WindowTrack {
    ImagePoint first;
    ImagePoint last;
    double t_first{0.0};
    double t_last{0.0};
};

/// Tau at the window end from the displacement across the window:
/// |r_first| * T / |r_last - r_first|. Exact for pure translation.
inline std::vector<TauSample> baseline_samples(const std::vector<WindowTrack>& tracks,
                                               const CameraConfig& cam, const RoiConfig& cfg) {
    std::vector<TauSample> out;
    for (const auto& w : tracks) {
        const double span = w.t_last - w.t_first;
        if (span <= 0.5 * cam.frame_interval()) continue;
        const double du = w.last.u_px - w.first.u_px;
        const double dv = w.last.v_px - w.first.v_px;
        const double disp = std::hypot(du, dv);
        if (!(disp / span > cfg.velocity_floor)) continue;
        if (cfg.drop_contracting && w.first.u_px * du + w.first.v_px * dv <= 0.0) continue;
        const double tau = std::hypot(w.first.u_px, w.first.v_px) * span / disp;
        if (tau > cfg.tau_max) continue;
        out.push_back({w.first.feature_id, tau, w.last.u_px, cfg.roi_index(w.last.u_px, cam)});
    }
    return out;
}

}  // namespace detail

/// Runs one closed-loop episode. Deterministic for a given config.
///
/// Per camera frame: project, track, estimate tau per feature, aggregate into
/// ROIs, detect the scene mode, pick a command, then integrate the unicycle to
/// the next frame in `substeps_per_frame` RK4 substeps (split at sense/act
/// boundaries). A collision or reaching the end of the centerline ends the log.
inline EpisodeLog run_episode(const EpisodeConfig& cfg) {
    cfg.validate();
    const World& world = *cfg.world;
    const CameraConfig& cam = cfg.camera;
    const double frame_dt = cam.frame_interval();
    const double substep = frame_dt / cfg.substeps_per_frame;
    const int control_every = cfg.frames_per_control();
    const bool sense_act = cfg.schedule.has_value();
    const bool goal_enabled = cfg.stop_at_goal && world.has_centerline();
    const double goal_arc = goal_enabled ? centerline_length(world) - cfg.goal_tolerance : 0.0;

    CameraConfig tracker_cam = cam;
    tracker_cam.rng_seed = cfg.seed;
    FeatureTracker tracker(tracker_cam);
    ModeFilter filter(cfg.scene.hysteresis, cfg.initial_mode);
    std::deque<RoiSummary> history;

    EpisodeLog log;
    VehicleState state = cfg.initial;
    ControlCommand command{0.0, cfg.initial.v > 0.0 ? cfg.initial.v : cfg.behavior.v_cruise};
    std::vector<TauSample> pool;
    std::vector<detail::WindowTrack> window_tracks;
    std::unordered_map<std::int64_t, std::size_t> window_index;

    auto current_mode = [&]() {
        switch (cfg.controller) {
            case ControllerMode::Auto: return filter.mode();
            case ControllerMode::Fixed: return cfg.fixed_mode;
            case ControllerMode::Off: return SceneMode::Corridor;
        }
        return filter.mode();
    };
    auto decide = [&](const RoiSummary& s) -> ControlCommand {
        if (cfg.controller == ControllerMode::Off) return {0.0, cfg.behavior.v_cruise};
        return select_controller(current_mode(), s, cfg.gains, cfg.behavior);
    };
    std::optional<RoiSummary> controller_input;
    auto observe_mode = [&](const RoiSummary& s) {
        history.push_back(s);
        while (history.size() > std::max<std::size_t>(cfg.scene.window, 2)) history.pop_front();
        if (cfg.controller != ControllerMode::Auto) return;
        const std::vector<RoiSummary> h(history.begin(), history.end());
        if (filter.update(detect_scene_mode(h, cfg.scene)))
            log.events.push_back({s.timestamp, "mode_switch", std::string(to_string(filter.mode()))});
    };
    auto phase_at = [&](double t) {
        return sense_act ? cfg.schedule->phase_at(t) : Phase::Sense;
    };

    const auto n_frames = static_cast<long>(std::floor(cfg.duration / frame_dt + 1e-9));
    for (long k = 0; k <= n_frames; ++k) {
        const double t = static_cast<double>(k) * frame_dt;
        const double t_next = static_cast<double>(k + 1) * frame_dt;
        const Phase phase = phase_at(t);
        const bool trusted = k > 0 && (!sense_act || (phase == Phase::Sense &&
                                                      phase_at(t - frame_dt) == Phase::Sense));

        const auto tracks = tracker.advance(project(state, cam, world));
        auto samples = tau_samples(tracks, cam, cfg.roi, &log.rejections);
        std::optional<RoiSummary> frame_summary;
        if (trusted) frame_summary = aggregate_rois(samples, cfg.roi, t);

        if (!sense_act) {
            if (frame_summary) {
                observe_mode(*frame_summary);
                if (k % control_every == 0) {
                    command = decide(*frame_summary);
                    controller_input = frame_summary;
                }
            } else if (k == 0) {
                command = decide(RoiSummary{});
            }
        } else if (phase == Phase::Sense) {
            if (trusted) pool.insert(pool.end(), samples.begin(), samples.end());
            // Window tracks span every sense frame of the window, including
            // the first one (whose own flow is untrusted).
            for (const auto& p : tracker.last_observation()) {
                auto it = window_index.find(p.feature_id);
                if (it == window_index.end()) {
                    window_index.emplace(p.feature_id, window_tracks.size());
                    window_tracks.push_back({p, p, t, t});
                } else if (window_tracks[it->second].t_last >= t - 1.5 * frame_dt) {
                    window_tracks[it->second].last = p;
                    window_tracks[it->second].t_last = t;
                }
            }
            const double boundary = cfg.schedule->next_boundary(t);
            if (boundary <= t_next + 1e-9) {
                // Latch: the Act command depends only on this Sense window.
                const auto window_samples =
                    cfg.window_estimator == WindowEstimator::Baseline
                        ? detail::baseline_samples(window_tracks, cam, cfg.roi)
                        : pool;
                const RoiSummary window_summary = aggregate_rois(window_samples, cfg.roi, t);
                observe_mode(window_summary);
                command = decide(window_summary);
                controller_input = window_summary;
                pool.clear();
                window_tracks.clear();
                window_index.clear();
            }
        }

        TickRecord tick;
        tick.t = t;
        tick.state = state;
        tick.phase = sense_act ? (phase == Phase::Sense ? PhaseTag::Sense : PhaseTag::Act)
                               : PhaseTag::Continuous;
        tick.mode = current_mode();
        tick.command = {sense_act ? sense_act_gate(t, *cfg.schedule, command.u).u : command.u,
                        command.v};
        tick.summary = controller_input;
        if (world.has_centerline()) tick.offset = centerline_offset(world, state.position());
        log.ticks.push_back(tick);
        if (cfg.record_samples) log.frames.push_back({t, trusted, frame_summary, std::move(samples)});

        if (goal_enabled && project_on_centerline(world, state.position()).arc_length >= goal_arc) {
            log.reached_goal = true;
            log.events.push_back({t, "goal", ""});
            break;
        }
        if (k == n_frames) break;

        // Integrate to the next frame.
        double tc = t;
        bool collided = false;
        while (tc < t_next - 1e-12 && !collided) {
            double seg_end = t_next;
            double u = command.u;
            if (sense_act) {
                seg_end = std::min(t_next, cfg.schedule->next_boundary(tc));
                u = sense_act_gate(tc, *cfg.schedule, command.u).u;
            }
            while (tc < seg_end - 1e-12) {
                const double h = std::min(substep, seg_end - tc);
                state = step(state, {u, command.v}, h, substep);
                tc = (seg_end - tc - h) < 1e-12 ? seg_end : tc + h;
                if (clearance(world, state.position()) < cfg.footprint_radius) {
                    collided = true;
                    log.events.push_back({tc, "collision", ""});
                    break;
                }
            }
        }
        if (collided) {
            log.collided = true;
            TickRecord last = log.ticks.back();
            last.t = tc;
            last.state = state;
            last.summary.reset();
            if (world.has_centerline()) last.offset = centerline_offset(world, state.position());
            log.ticks.push_back(last);
            break;
        }
    }
    return log;
}

// ---------------------------------------------------------------------------
// Metrics

struct EpisodeMetrics {
    double rms_offset{0.0};
    double max_offset{0.0};
    std::optional<double> convergence_time;
    bool collision{false};
    bool goal_reached{false};
    int mode_switches{0};
    double mean_abs_u{0.0};
    double final_offset{0.0};
    double rest_offset{0.0};
    int rest_crossings{0};  ///< sign changes of (offset - rest) outside the deadband
    double overshoot{0.0};  ///< peak excursion past rest, opposite the initial error [m]
    double duration{0.0};
};

struct MetricsOptions {
    double band{0.05};       ///< convergence band on |offset| [m]
    double deadband{0.05};   ///< ignored excursions around the rest value [m]
    std::optional<double> rest_offset;  ///< default: mean offset over the last quarter
};

/// Counts sign changes of (offset - rest), ignoring excursions within `deadband`.
inline int count_rest_crossings(std::span<const double> offsets, double rest, double deadband) {
    int sign = 0;
    int crossings = 0;
    for (double o : offsets) {
        const double e = o - rest;
        if (std::abs(e) <= deadband) continue;
        const int s = e > 0.0 ? 1 : -1;
        if (sign != 0 && s != sign) ++crossings;
        sign = s;
    }
    return crossings;
}

inline EpisodeMetrics metrics(const EpisodeLog& log, const MetricsOptions& opt = {}) {
    if (log.ticks.empty()) throw DomainError("metrics: empty episode log");
    EpisodeMetrics m;
    m.collision = log.collided;
    m.goal_reached = log.reached_goal;
    m.duration = log.ticks.back().t - log.ticks.front().t;
    m.mode_switches = static_cast<int>(std::count_if(log.events.begin(), log.events.end(),
                                                     [](const auto& e) { return e.kind == "mode_switch"; }));
    double sum_u = 0.0;
    for (const auto& t : log.ticks) sum_u += std::abs(t.command.u);
    m.mean_abs_u = sum_u / static_cast<double>(log.ticks.size());

    std::vector<double> offsets;
    std::vector<double> times;
    for (const auto& t : log.ticks)
        if (t.offset) {
            offsets.push_back(*t.offset);
            times.push_back(t.t);
        }
    if (offsets.empty()) return m;
    double sq = 0.0;
    for (double o : offsets) {
        sq += o * o;
        m.max_offset = std::max(m.max_offset, std::abs(o));
    }
    m.rms_offset = std::sqrt(sq / static_cast<double>(offsets.size()));
    m.final_offset = offsets.back();

    if (!log.collided && std::abs(offsets.back()) < opt.band) {
        std::size_t i = offsets.size();
        while (i > 0 && std::abs(offsets[i - 1]) < opt.band) --i;
        m.convergence_time = times[i];
    }

    if (opt.rest_offset) {
        m.rest_offset = *opt.rest_offset;
    } else {
        const std::size_t start = offsets.size() - std::max<std::size_t>(1, offsets.size() / 4);
        double acc = 0.0;
        for (std::size_t i = start; i < offsets.size(); ++i) acc += offsets[i];
        m.rest_offset = acc / static_cast<double>(offsets.size() - start);
    }
    m.rest_crossings = count_rest_crossings(offsets, m.rest_offset, opt.deadband);
    const double e0 = offsets.front() - m.rest_offset;
    for (double o : offsets)
        m.overshoot = std::max(m.overshoot, e0 >= 0.0 ? m.rest_offset - o : o - m.rest_offset);

    return m;
}

inline nlohmann::json to_json(const EpisodeMetrics& m) {
    nlohmann::json j{{"rms_offset", m.rms_offset},
                     {"max_offset", m.max_offset},
                     {"collision", m.collision},
                     {"goal_reached", m.goal_reached},
                     {"mode_switches", m.mode_switches},
                     {"mean_abs_u", m.mean_abs_u},
                     {"final_offset", m.final_offset},
                     {"rest_offset", m.rest_offset},
                     {"rest_crossings", m.rest_crossings},
                     {"overshoot", m.overshoot},
                     {"duration", m.duration}};
    j["convergence_time"] = m.convergence_time ? nlohmann::json(*m.convergence_time) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {
inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string(); }
}  // namespace detail

inline constexpr const char* kEpisodeCsvHeader =
    "t,x,y,theta,v,u,phase,mode,tau_fl,tau_l,tau_c,tau_r,tau_fr,offset";

inline std::string episode_csv(const EpisodeLog& log) {
    std::ostringstream os;
    os << kEpisodeCsvHeader << '\n';
    for (const auto& t : log.ticks) {
        os << detail::fmt_num(t.t) << ',' << detail::fmt_num(t.state.x) << ','
           << detail::fmt_num(t.state.y) << ',' << detail::fmt_num(t.state.theta) << ','
           << detail::fmt_num(t.command.v) << ',' << detail::fmt_num(t.command.u) << ','
           << to_string(t.phase) << ',' << to_string(t.mode);
        for (std::size_t i = 0; i < kRoiCount; ++i)
            os << ',' << (t.summary ? detail::fmt_opt(t.summary->tau[i]) : std::string());
        os << ',' << detail::fmt_opt(t.offset) << '\n';
    }
    return os.str();
}

inline nlohmann::json episode_sidecar(const EpisodeLog& log, const EpisodeMetrics& m) {
    nlohmann::json j;
    j["events"] = nlohmann::json::array();
    for (const auto& e : log.events)
        j["events"].push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
    j["metrics"] = to_json(m);
    j["rejections"] = {{"below_floor", log.rejections.below_floor},
                       {"contracting", log.rejections.contracting},
                       {"above_tau_max", log.rejections.above_tau_max}};
    return j;
}

// ---------------------------------------------------------------------------
// Batch execution

/// Runs `n` independent jobs on up to `threads` workers; results keep job order.
template <typename Result>
std::vector<Result> run_parallel(std::size_t n, const std::function<Result(std::size_t)>& job,
                                 unsigned threads = std::thread::hardware_concurrency()) {
    std::vector<Result> results(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) results[i] = job(i);
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < count; ++i) pool.emplace_back(worker);
    worker();
    return results;
}

// ---------------------------------------------------------------------------
// Tau trace experiment: geometric vs perceived tau for one wall feature

enum class Maneuver { Straight, TurnAway, TurnToward };

inline constexpr std::string_view to_string(Maneuver m) {
    switch (m) {
        case Maneuver::Straight: return "straight";
        case Maneuver::TurnAway: return "turn_away";
        case Maneuver::TurnToward: return "turn_toward";
    }
    return "unknown";
}

struct TauTraceConfig {
    std::shared_ptr<const World> world;  ///< must contain exactly one feature
    VehicleState initial{0.0, 0.0, std::numbers::pi / 2.0, 0.5};
    CameraConfig camera;
    RoiConfig roi;
    SenseActSchedule schedule{0.4, 0.25, 0.0};
    double speed{0.5};
    double turn_rate{0.15};  ///< magnitude of the turning maneuvers [rad/s]
    double duration{4.0};
    std::uint64_t seed{0};
};

struct TracePoint {
    double t{0.0};
    double tau_geom{0.0};
    std::optional<double> tau_per;
    PhaseTag phase{PhaseTag::Continuous};
    bool trusted{false};
};

struct TraceSeries {
    Maneuver maneuver{Maneuver::Straight};
    bool sense_act{false};
    std::vector<TracePoint> points;
    double rms{0.0};  ///< over trusted points with a perceived value
    int used{0};

    [[nodiscard]] std::string variant() const { return sense_act ? "sense_act" : "continuous"; }
};

/// Open-loop run of one maneuver; perceived tau logged every frame.
inline TraceSeries run_tau_trace(const TauTraceConfig& cfg, Maneuver maneuver, bool sense_act) {
    if (!cfg.world || cfg.world->features.size() != 1)
        throw ConfigError("tau trace: world must contain exactly one feature");
    const auto& feature = cfg.world->features.front();
    // The feature's side decides which direction is "away".
    const double side =
        to_camera_frame(cfg.initial, 0.0, feature.position).lateral < 0.0 ? 1.0 : -1.0;  // +1: left
    double u = 0.0;
    if (maneuver == Maneuver::TurnAway) u = -side * cfg.turn_rate;
    if (maneuver == Maneuver::TurnToward) u = side * cfg.turn_rate;

    CameraConfig cam = cfg.camera;
    cam.rng_seed = cfg.seed;
    FeatureTracker tracker(cam);
    const double dt = cam.frame_interval();
    TraceSeries series{maneuver, sense_act, {}, 0.0, 0};
    VehicleState s = cfg.initial;
    s.v = cfg.speed;
    const auto n = static_cast<long>(std::floor(cfg.duration / dt + 1e-9));
    double sq = 0.0;
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        const auto tracks = tracker.advance(project(s, cam, *cfg.world));
        TracePoint p;
        p.t = t;
        p.tau_geom = geometric_tau(s, feature.position);
        Phase ph = sense_act ? cfg.schedule.phase_at(t) : Phase::Sense;
        p.phase = sense_act ? (ph == Phase::Sense ? PhaseTag::Sense : PhaseTag::Act) : PhaseTag::Continuous;
        p.trusted = k > 0 && (!sense_act || (ph == Phase::Sense &&
                                             cfg.schedule.phase_at(t - dt) == Phase::Sense));
        if (!tracks.empty()) {
            const auto tau = perceived_tau(tracks.front(), cfg.roi.velocity_floor);
            if (tau && *tau <= cfg.roi.tau_max) p.tau_per = tau;
        }
        if (p.trusted && p.tau_per) {
            sq += (*p.tau_per - p.tau_geom) * (*p.tau_per - p.tau_geom);
            ++series.used;
        }
        series.points.push_back(p);
        if (k == n) break;
        double tc = t;
        while (tc < t + dt - 1e-12) {
            double seg_end = t + dt;
            double applied = u;
            if (sense_act) {
                seg_end = std::min(seg_end, cfg.schedule.next_boundary(tc));
                applied = sense_act_gate(tc, cfg.schedule, u).u;
            }
            s = step(s, {applied, cfg.speed}, seg_end - tc, dt / 3.0);
            tc = seg_end;
        }
    }
    series.rms = series.used > 0 ? std::sqrt(sq / series.used) : std::numeric_limits<double>::quiet_NaN();
    return series;
}

/// All three maneuvers, continuous and sense-act, sharing one noise seed.
inline std::vector<TraceSeries> tau_trace_experiment(const TauTraceConfig& cfg) {
    std::vector<TraceSeries> out;
    for (bool sa : {false, true})
        for (auto m : {Maneuver::Straight, Maneuver::TurnAway, Maneuver::TurnToward})
            out.push_back(run_tau_trace(cfg, m, sa));
    return out;
}

inline constexpr const char* kTraceCsvHeader = "t,tau_geom,tau_per,phase,variant,maneuver,trusted";

inline std::string trace_csv(const std::vector<TraceSeries>& series) {
    std::ostringstream os;
    os << kTraceCsvHeader << '\n';
    for (const auto& s : series)
        for (const auto& p : s.points)
            os << detail::fmt_num(p.t) << ',' << detail::fmt_num(p.tau_geom) << ','
               << detail::fmt_opt(p.tau_per) << ',' << to_string(p.phase) << ',' << s.variant()
               << ',' << to_string(s.maneuver) << ',' << (p.trusted ? 1 : 0) << '\n';
    return os.str();
}

inline nlohmann::json trace_summary(const std::vector<TraceSeries>& series) {
    nlohmann::json j;
    j["series"] = nlohmann::json::array();
    for (const auto& s : series)
        j["series"].push_back({{"maneuver", std::string(to_string(s.maneuver))},
                               {"variant", s.variant()},
                               {"rms", std::isfinite(s.rms) ? nlohmann::json(s.rms) : nlohmann::json(nullptr)},
                               {"samples", s.used}});
    return j;
}

}  // namespace tauvis

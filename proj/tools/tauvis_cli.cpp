// tauvis: run episodes, tau-trace experiments, stability tables and sweeps.
//
// Exit status: 0 success, 1 usage or configuration error, 2 collision.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <tauvis/config.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCollision = 2;

struct CommonOptions {
    std::string config;
    std::string out{"."};
    std::optional<std::uint64_t> seed;
    std::string world;
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tauvis::ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw tauvis::ConfigError("write failed: " + path.string());
}

fs::path prepare_out(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw tauvis::ConfigError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

/// Reads a JSON config and applies the --seed and --world flags to it.
nlohmann::json read_with_overrides(const CommonOptions& opt) {
    auto j = tauvis::detail::read_json_file(opt.config);
    if (!j.is_object()) throw tauvis::ConfigError(opt.config + ": expected an object");
    if (opt.seed) j["seed"] = *opt.seed;
    if (!opt.world.empty()) j["world"] = fs::absolute(opt.world).string();
    return j;
}

int cmd_simulate(const CommonOptions& opt) {
    const auto cfg =
        tauvis::episode_config_from_json(read_with_overrides(opt), fs::path(opt.config).parent_path());
    const auto log = tauvis::run_episode(cfg);
    const auto m = tauvis::metrics(log);
    const auto dir = prepare_out(opt.out);
    write_file(dir / "episode.csv", tauvis::episode_csv(log));
    write_file(dir / "episode.json", tauvis::episode_sidecar(log, m).dump(2) + "\n");
    std::printf("ticks=%zu duration=%.3f goal=%s collision=%s rms_offset=%.4f mode_switches=%d\n",
                log.ticks.size(), m.duration, m.goal_reached ? "yes" : "no",
                m.collision ? "yes" : "no", m.rms_offset, m.mode_switches);
    return log.collided ? kExitCollision : kExitOk;
}

int cmd_stability(const CommonOptions& opt) {
    const auto grid = tauvis::stability_grid_from_json(tauvis::detail::read_json_file(opt.config));
    const auto rows = tauvis::evaluate_stability_grid(grid);
    if (rows.empty()) throw tauvis::ConfigError("stability grid produced no rows");
    write_file(prepare_out(opt.out) / "stability.csv", tauvis::stability_csv(rows));
    std::size_t hurwitz = 0, agree = 0;
    for (const auto& r : rows) {
        hurwitz += r.hurwitz;
        agree += r.oracle_agrees;
    }
    std::printf("rows=%zu hurwitz=%zu closed_form_agrees=%zu\n", rows.size(), hurwitz, agree);
    return kExitOk;
}

int cmd_tau_trace(const CommonOptions& opt) {
    auto cfg = tauvis::trace_config_from_json(read_with_overrides(opt), fs::path(opt.config).parent_path());
    const auto series = tauvis::tau_trace_experiment(cfg);
    const auto dir = prepare_out(opt.out);
    write_file(dir / "tau_trace.csv", tauvis::trace_csv(series));
    write_file(dir / "tau_trace_summary.json", tauvis::trace_summary(series).dump(2) + "\n");
    for (const auto& s : series)
        std::printf("%-11s %-10s rms=%.4f samples=%d\n", std::string(to_string(s.maneuver)).c_str(),
                    s.variant().c_str(), s.rms, s.used);
    return kExitOk;
}

int cmd_sweep(const CommonOptions& opt) {
    auto manifest_json = tauvis::detail::read_json_file(opt.config);
    if (!manifest_json.is_object()) throw tauvis::ConfigError(opt.config + ": expected an object");
    if (opt.seed) manifest_json["seed"] = *opt.seed;
    auto manifest = tauvis::sweep_manifest_from_json(manifest_json, fs::path(opt.config).parent_path());
    if (!opt.world.empty()) manifest.base["world"] = fs::absolute(opt.world).string();
    const auto jobs = tauvis::expand_sweep(manifest);

    struct Row {
        std::optional<tauvis::EpisodeMetrics> metrics;
        std::string error;
    };
    const unsigned threads =
        manifest.threads > 0 ? manifest.threads : std::max(1u, std::thread::hardware_concurrency());
    const auto rows = tauvis::run_parallel<Row>(
        jobs.size(),
        [&](std::size_t i) {
            Row row;
            try {
                const auto cfg = tauvis::episode_config_from_json(jobs[i].config, manifest.base_dir);
                row.metrics = tauvis::metrics(tauvis::run_episode(cfg));
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            return row;
        },
        threads);

    using tauvis::detail::fmt_num;
    std::ostringstream os;
    os << "index,grid_point,seed";
    for (const auto& [key, values] : manifest.axes) os << ',' << key;
    os << ",status,rms_offset,max_offset,convergence_time,collision,goal_reached,mode_switches,"
          "mean_abs_u,final_offset,rest_offset,rest_crossings,overshoot,duration,error\n";
    std::size_t ok = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        os << job.index << ',' << job.grid_point << ',' << job.seed;
        for (const auto& [key, values] : manifest.axes) os << ',' << job.overrides[key].dump();
        const auto& r = rows[i];
        if (r.metrics) {
            ++ok;
            const auto& m = *r.metrics;
            os << ",ok," << fmt_num(m.rms_offset) << ',' << fmt_num(m.max_offset) << ','
               << (m.convergence_time ? fmt_num(*m.convergence_time) : "") << ',' << m.collision
               << ',' << m.goal_reached << ',' << m.mode_switches << ',' << fmt_num(m.mean_abs_u)
               << ',' << fmt_num(m.final_offset) << ',' << fmt_num(m.rest_offset) << ','
               << m.rest_crossings << ',' << fmt_num(m.overshoot) << ',' << fmt_num(m.duration)
               << ",\n";
        } else {
            std::string err = r.error;
            std::replace(err.begin(), err.end(), '"', '\'');
            os << ",error,,,,,,,,,,,,,\"" << err << "\"\n";
        }
    }
    write_file(prepare_out(opt.out) / "sweep.csv", os.str());
    std::printf("rows=%zu ok=%zu\n", jobs.size(), ok);
    if (ok == 0) {
        std::fprintf(stderr, "sweep: every episode failed\n");
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tau-based visual corridor navigation simulator"};
    app.require_subcommand(1);
    CommonOptions opt;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--world", opt.world, "world file override")->check(CLI::ExistingFile);
    };
    auto* simulate = app.add_subcommand("simulate", "run one closed-loop episode");
    auto* stability = app.add_subcommand("stability", "eigenvalue table over a parameter grid");
    auto* trace = app.add_subcommand("tau-trace", "geometric vs perceived tau experiment");
    auto* sweep = app.add_subcommand("sweep", "episodes over a gain grid and seed list");
    for (auto* s : {simulate, stability, trace, sweep}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    for (auto* s : {simulate, stability, trace, sweep})
        if (s->count("--seed") > 0) opt.seed = seed;

    try {
        if (*simulate) return cmd_simulate(opt);
        if (*stability) return cmd_stability(opt);
        if (*trace) return cmd_tau_trace(opt);
        if (*sweep) return cmd_sweep(opt);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}

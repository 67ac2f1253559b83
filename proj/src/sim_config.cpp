#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "isacfusion/core.hpp"
#include "isacfusion/fileio.hpp"
#include "isacfusion/sim.hpp"
#include "json_util.hpp"

namespace isac::sim {
namespace {

using nlohmann::json;

using detail::read;
using detail::reject_unknown;

std::vector<double> number_or_list(const json& v) {
    if (v.is_number()) return {v.get<double>()};
    return v.get<std::vector<double>>();
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& json_text) {
    ScenarioConfig cfg;
    try {
        const auto j = json::parse(json_text);
        reject_unknown(j,
                       {"aoi", "geometry", "rates", "duration_s", "noise", "rng_seed", "waveform",
                        "clutter_removal", "detector", "target_amplitude"},
                       "scenario");
        if (j.contains("aoi")) {
            const auto& a = j["aoi"];
            reject_unknown(a, {"width", "depth"}, "scenario.aoi");
            read(a, "width", cfg.aoi_width);
            read(a, "depth", cfg.aoi_depth);
        }
        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            reject_unknown(g,
                           {"isac_x", "isac_y", "isac_height", "target_height", "azimuth_deg",
                            "elevation_deg"},
                           "scenario.geometry");
            read(g, "isac_x", cfg.geometry.isac_position.x);
            read(g, "isac_y", cfg.geometry.isac_position.y);
            read(g, "isac_height", cfg.geometry.isac_height);
            read(g, "target_height", cfg.geometry.target_height);
            if (g.contains("azimuth_deg")) cfg.geometry.azimuth = deg2rad(g["azimuth_deg"].get<double>());
            if (g.contains("elevation_deg")) {
                cfg.geometry.elevation = deg2rad(g["elevation_deg"].get<double>());
            }
        }
        if (j.contains("rates")) {
            const auto& r = j["rates"];
            reject_unknown(r, {"isac_hz", "imu_hz", "truth_hz"}, "scenario.rates");
            read(r, "isac_hz", cfg.isac_rate);
            read(r, "imu_hz", cfg.imu_rate);
            read(r, "truth_hz", cfg.truth_rate);
        }
        read(j, "duration_s", cfg.duration);
        if (j.contains("noise")) {
            const auto& n = j["noise"];
            reject_unknown(n,
                           {"accel_noise_std", "gyro_noise_std", "accel_bias", "gyro_bias", "csi_noise_std",
                            "clutter_amplitude", "clutter_scatterers", "clutter_min_range",
                            "clutter_max_range"},
                           "scenario.noise");
            read(n, "accel_noise_std", cfg.noise.accel_noise_std);
            read(n, "gyro_noise_std", cfg.noise.gyro_noise_std);
            read(n, "accel_bias", cfg.noise.accel_bias);
            read(n, "gyro_bias", cfg.noise.gyro_bias);
            read(n, "csi_noise_std", cfg.noise.csi_noise_std);
            read(n, "clutter_amplitude", cfg.noise.clutter_amplitude);
            read(n, "clutter_scatterers", cfg.noise.clutter_scatterers);
            read(n, "clutter_min_range", cfg.noise.clutter_min_range);
            read(n, "clutter_max_range", cfg.noise.clutter_max_range);
        }
        read(j, "rng_seed", cfg.rng_seed);
        if (j.contains("waveform")) {
            const auto& w = j["waveform"];
            reject_unknown(w,
                           {"center_frequency_hz", "bandwidth_hz", "subcarrier_spacing_hz",
                            "num_symbols", "num_subcarriers"},
                           "scenario.waveform");
            read(w, "center_frequency_hz", cfg.waveform.center_frequency);
            read(w, "bandwidth_hz", cfg.waveform.bandwidth);
            read(w, "subcarrier_spacing_hz", cfg.waveform.subcarrier_spacing);
            read(w, "num_symbols", cfg.waveform.num_symbols);
            read(w, "num_subcarriers", cfg.waveform.num_subcarriers);
        }
        if (j.contains("clutter_removal")) {
            const auto& c = j["clutter_removal"];
            reject_unknown(c, {"alpha", "bootstrap_frames"}, "scenario.clutter_removal");
            read(c, "alpha", cfg.clutter.alpha);
            read(c, "bootstrap_frames", cfg.clutter.bootstrap_frames);
        }
        if (j.contains("detector")) {
            const auto& d = j["detector"];
            reject_unknown(d, {"threshold", "floor_ratio"}, "scenario.detector");
            read(d, "threshold", cfg.detector.threshold);
            read(d, "floor_ratio", cfg.detector.floor_ratio);
        }
        read(j, "target_amplitude", cfg.target_amplitude);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("scenario config: {}", e.what()));
    }
    cfg.validate();
    return cfg;
}

std::string scenario_config_to_json(const ScenarioConfig& cfg) {
    nlohmann::ordered_json j;
    j["aoi"] = {{"width", cfg.aoi_width}, {"depth", cfg.aoi_depth}};
    const auto& g = cfg.geometry;
    j["geometry"] = {{"isac_x", g.isac_position.x},
                     {"isac_y", g.isac_position.y},
                     {"isac_height", g.isac_height},
                     {"target_height", g.target_height},
                     {"azimuth_deg", g.azimuth * 180.0 / 3.14159265358979323846},
                     {"elevation_deg", g.elevation * 180.0 / 3.14159265358979323846}};
    j["rates"] = {{"isac_hz", cfg.isac_rate}, {"imu_hz", cfg.imu_rate}, {"truth_hz", cfg.truth_rate}};
    j["duration_s"] = cfg.duration;
    const auto& n = cfg.noise;
    j["noise"] = {{"accel_noise_std", n.accel_noise_std},
                  {"gyro_noise_std", n.gyro_noise_std},
                  {"accel_bias", n.accel_bias},
                  {"gyro_bias", n.gyro_bias},
                  {"csi_noise_std", n.csi_noise_std},
                  {"clutter_amplitude", n.clutter_amplitude},
                  {"clutter_scatterers", n.clutter_scatterers},
                  {"clutter_min_range", n.clutter_min_range},
                  {"clutter_max_range", n.clutter_max_range}};
    j["rng_seed"] = cfg.rng_seed;
    const auto& w = cfg.waveform;
    j["waveform"] = {{"center_frequency_hz", w.center_frequency},
                     {"bandwidth_hz", w.bandwidth},
                     {"subcarrier_spacing_hz", w.subcarrier_spacing},
                     {"num_symbols", w.num_symbols},
                     {"num_subcarriers", w.num_subcarriers}};
    j["clutter_removal"] = {{"alpha", cfg.clutter.alpha},
                            {"bootstrap_frames", cfg.clutter.bootstrap_frames}};
    j["detector"] = {{"threshold", cfg.detector.threshold},
                     {"floor_ratio", cfg.detector.floor_ratio}};
    j["target_amplitude"] = cfg.target_amplitude;
    return j.dump(2) + "\n";
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    try {
        return parse_scenario_config(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

TrajectorySpec parse_trajectory(const std::string& json_text) {
    TrajectorySpec spec;
    spec.speeds.clear();
    spec.dwell.clear();
    try {
        const auto j = json::parse(json_text);
        reject_unknown(j, {"waypoints", "speeds", "dwell", "ramp_accel", "laps"}, "trajectory");
        for (const auto& wp : j.at("waypoints")) {
            spec.waypoints.push_back({wp.at(0).get<double>(), wp.at(1).get<double>()});
        }
        spec.speeds = number_or_list(j.at("speeds"));
        if (j.contains("dwell")) spec.dwell = number_or_list(j["dwell"]);
        read(j, "ramp_accel", spec.ramp_accel);
        read(j, "laps", spec.laps);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("trajectory: {}", e.what()));
    }
    return spec;
}

std::string trajectory_to_json(const TrajectorySpec& spec) {
    nlohmann::ordered_json j;
    auto wps = nlohmann::ordered_json::array();
    for (const auto& w : spec.waypoints) wps.push_back({w.x, w.y});
    j["waypoints"] = std::move(wps);
    j["speeds"] = spec.speeds;
    j["dwell"] = spec.dwell;
    j["ramp_accel"] = spec.ramp_accel;
    j["laps"] = spec.laps;
    return j.dump(2) + "\n";
}

TrajectorySpec load_trajectory(const std::filesystem::path& path) {
    try {
        return parse_trajectory(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

}  // namespace isac::sim

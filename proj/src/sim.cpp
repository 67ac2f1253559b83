#include "isacfusion/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "isacfusion/csv.hpp"
#include "isacfusion/fileio.hpp"
#include "isacfusion/imu.hpp"
#include "isacfusion/rng.hpp"

namespace isac::sim {
namespace {

using radar::Complex;
using radar::ComplexMatrix;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum StreamTag : std::uint64_t { kImuStream = 1, kCsiStream = 2, kClutterStream = 3 };

double wrap_angle(double a) {
    a = std::remainder(a, kTwoPi);
    return a;
}

int sample_count(double duration, double rate) {
    // Samples at k / rate for k / rate < duration.
    int n = static_cast<int>(std::ceil(duration * rate - 1e-9));
    while (n > 0 && static_cast<double>(n - 1) / rate >= duration) --n;
    return std::max(n, 0);
}

}  // namespace

void NoiseConfig::validate() const {
    for (double v : {accel_noise_std, gyro_noise_std, csi_noise_std, clutter_amplitude}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("noise: standard deviations and amplitudes must be >= 0");
        }
    }
    if (!std::isfinite(accel_bias)) throw ValidationError("noise: accel_bias must be finite");
    if (!std::isfinite(gyro_bias)) throw ValidationError("noise: gyro_bias must be finite");
    if (clutter_scatterers < 0) throw ValidationError("noise: clutter_scatterers must be >= 0");
    if (!(clutter_min_range >= 0.0 && clutter_max_range >= clutter_min_range)) {
        throw ValidationError("noise: bad clutter range interval");
    }
}

bool ScenarioConfig::inside_aoi(const Pose2D& p) const {
    return p.x >= 0.0 && p.x <= aoi_width && p.y >= 0.0 && p.y <= aoi_depth;
}

void ScenarioConfig::validate() const {
    if (!(aoi_width > 0.0) || !(aoi_depth > 0.0)) {
        throw ValidationError("scenario: AoI extents must be positive");
    }
    if (!(isac_rate > 0.0) || !(imu_rate > 0.0) || !(truth_rate > 0.0)) {
        throw ValidationError("scenario: sensor rates must be positive");
    }
    if (!(duration >= 0.0)) throw ValidationError("scenario: duration must be >= 0");
    if (!(target_amplitude > 0.0)) throw ValidationError("scenario: target_amplitude must be > 0");
    noise.validate();
    waveform.validate();
    radar::ClutterFilter{clutter};
    if (!(detector.threshold > 0.0)) throw ValidationError("scenario: detector threshold must be > 0");
}

// --- trajectory -------------------------------------------------------------

Trajectory::Trajectory(const TrajectorySpec& spec, const ScenarioConfig& cfg) {
    const auto& w = spec.waypoints;
    if (w.size() < 2) throw ValidationError("trajectory: need at least 2 waypoints");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i].x) || !std::isfinite(w[i].y) || !cfg.inside_aoi(w[i])) {
            throw ValidationError(fmt::format("trajectory: waypoint {} ({}, {}) lies outside the "
                                              "{} x {} m area of interest",
                                              i, w[i].x, w[i].y, cfg.aoi_width, cfg.aoi_depth));
        }
    }
    if (spec.laps < 1) throw ValidationError("trajectory: laps must be >= 1");
    const bool closed = w.front() == w.back();
    if (spec.laps > 1 && !closed) {
        throw ValidationError("trajectory: laps > 1 requires the last waypoint to equal the first");
    }
    const std::size_t segs_per_lap = w.size() - 1;
    if (spec.speeds.size() != 1 && spec.speeds.size() != segs_per_lap) {
        throw ValidationError(fmt::format("trajectory: expected 1 or {} speeds, got {}",
                                          segs_per_lap, spec.speeds.size()));
    }
    for (double v : spec.speeds) {
        if (!(v > 0.0)) throw ValidationError("trajectory: speeds must be positive");
    }
    if (!spec.dwell.empty() && spec.dwell.size() != 1 && spec.dwell.size() != w.size()) {
        throw ValidationError(fmt::format("trajectory: expected 0, 1 or {} dwell times, got {}",
                                          w.size(), spec.dwell.size()));
    }
    for (double d : spec.dwell) {
        if (!(d >= 0.0)) throw ValidationError("trajectory: dwell times must be >= 0");
    }
    if (!(spec.ramp_accel >= 0.0)) throw ValidationError("trajectory: ramp_accel must be >= 0");

    auto speed_of = [&](std::size_t seg) {
        return spec.speeds.size() == 1 ? spec.speeds[0] : spec.speeds[seg % segs_per_lap];
    };
    auto dwell_of = [&](std::size_t wp) {
        if (spec.dwell.empty()) return 0.0;
        return spec.dwell.size() == 1 ? spec.dwell[0] : spec.dwell[wp];
    };

    // Expand laps into one waypoint list, remembering each entry's index in `w`.
    std::vector<std::size_t> seq;
    for (int lap = 0; lap < spec.laps; ++lap) {
        for (std::size_t i = (lap == 0 ? 0 : 1); i < w.size(); ++i) seq.push_back(i);
    }

    std::vector<Eigen::Vector2d> dirs;
    for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
        const Eigen::Vector2d d = w[seq[k + 1]].vec() - w[seq[k]].vec();
        dirs.push_back(d.norm() > 0.0 ? Eigen::Vector2d(d.normalized()) : Eigen::Vector2d::Zero());
    }
    double heading = 0.0;
    for (const auto& d : dirs) {
        if (d.squaredNorm() > 0.0) {
            heading = std::atan2(d.y(), d.x());
            break;
        }
    }

    double t = 0.0;
    Eigen::Vector2d pos = w[seq[0]].vec();
    auto add_phase = [&](Phase p) {
        if (p.duration <= 0.0) return;
        p.t0 = t;
        phases_.push_back(p);
        t += p.duration;
    };
    auto add_dwell = [&](std::size_t k) {
        // Turn toward the next non-degenerate segment while dwelling.
        double target = heading;
        for (std::size_t j = k; j < dirs.size(); ++j) {
            if (dirs[j].squaredNorm() > 0.0) {
                target = heading + wrap_angle(std::atan2(dirs[j].y(), dirs[j].x()) - heading);
                break;
            }
        }
        const double dwell = dwell_of(seq[k]);
        Phase p;
        p.duration = dwell;
        p.p0 = pos;
        p.heading0 = heading;
        p.yaw_rate = dwell > 0.0 ? (target - heading) / dwell : 0.0;
        add_phase(p);
        heading = target;
    };

    add_dwell(0);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        const Eigen::Vector2d a = w[seq[k]].vec();
        const Eigen::Vector2d b = w[seq[k + 1]].vec();
        const double length = (b - a).norm();
        if (length > 0.0) {
            const double v = speed_of(k);
            const double acc = spec.ramp_accel;
            Phase base;
            base.dir = dirs[k];
            base.heading0 = heading;
            auto straight = [&](double v0, double accel, double dur) {
                Phase p = base;
                p.p0 = pos;
                p.v0 = v0;
                p.accel = accel;
                p.duration = dur;
                add_phase(p);
                pos += p.dir * (v0 * dur + 0.5 * accel * dur * dur);
            };
            if (acc <= 0.0) {
                straight(v, 0.0, length / v);
            } else if (v * v / acc <= length) {
                const double ramp_t = v / acc;
                straight(0.0, acc, ramp_t);
                straight(v, 0.0, (length - v * v / acc) / v);
                straight(v, -acc, ramp_t);
            } else {
                const double vpeak = std::sqrt(acc * length);
                straight(0.0, acc, vpeak / acc);
                straight(vpeak, -acc, vpeak / acc);
            }
            pos = b;
        }
        add_dwell(k + 1);
    }
    duration_ = t;
    final_.position = Pose2D::from(pos);
    final_.heading = heading;
}

KinematicState Trajectory::state_at(double t) const {
    KinematicState s;
    s.t = t;
    const auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                                     [](double v, const Phase& p) { return v < p.t0; });
    if (it == phases_.begin()) {
        if (phases_.empty()) {
            s.position = final_.position;
            s.heading = final_.heading;
            return s;
        }
        const auto& p = phases_.front();
        s.position = Pose2D::from(p.p0);
        s.heading = p.heading0;
        return s;
    }
    const Phase& p = *(it - 1);
    const double tau = t - p.t0;
    if (tau >= p.duration && it == phases_.end()) {
        s.position = final_.position;
        s.heading = final_.heading;
        return s;
    }
    s.position = Pose2D::from(p.p0 + p.dir * (p.v0 * tau + 0.5 * p.accel * tau * tau));
    s.velocity = p.dir * (p.v0 + p.accel * tau);
    s.acceleration = p.dir * p.accel;
    s.heading = p.heading0 + p.yaw_rate * tau;
    s.yaw_rate = p.yaw_rate;
    return s;
}

Pose2D Trajectory::start() const { return state_at(0.0).position; }

double Trajectory::initial_heading() const { return state_at(0.0).heading; }

double scenario_duration(const Trajectory& track, const ScenarioConfig& cfg) {
    return cfg.duration > 0.0 ? cfg.duration : track.duration();
}

TruthRun generate_truth(const TrajectorySpec& spec, const ScenarioConfig& cfg) {
    cfg.validate();
    TruthRun run{Trajectory(spec, cfg), {}, {}};
    const double span = scenario_duration(run.track, cfg);
    // Truth includes the end instant so estimates at the tail can be aligned.
    const int n = static_cast<int>(std::floor(span * cfg.truth_rate + 1e-9)) + 1;
    run.samples.reserve(n);
    run.dense.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double t = k / cfg.truth_rate;
        auto s = run.track.state_at(t);
        run.samples.push_back({t, s.position});
        run.dense.push_back(s);
    }
    return run;
}

std::vector<ImuMeasurement> sample_imu(const Trajectory& track, const ScenarioConfig& cfg) {
    const auto& noise = cfg.noise;
    Rng rng(derive_seed(cfg.rng_seed, kImuStream));
    boost::random::normal_distribution<double> n01(0.0, 1.0);

    const int n = sample_count(scenario_duration(track, cfg), cfg.imu_rate);
    std::vector<ImuMeasurement> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double t = k / cfg.imu_rate;
        // Interval average over (t - 1/rate, t], exact for piecewise-constant motion.
        const auto s = track.state_at(std::max(0.0, t - 0.5 / cfg.imu_rate));
        const Eigen::Vector2d body = imu::rotate_to_body(s.acceleration, s.heading);
        ImuMeasurement m;
        m.t = t;
        m.accel_body = {body.x() + noise.accel_bias + noise.accel_noise_std * n01(rng),
                        body.y() + noise.accel_bias + noise.accel_noise_std * n01(rng),
                        noise.accel_noise_std * n01(rng)};
        m.gyro = {noise.gyro_noise_std * n01(rng), noise.gyro_noise_std * n01(rng),
                  s.yaw_rate + noise.gyro_bias + noise.gyro_noise_std * n01(rng)};
        out.push_back(m);
    }
    return out;
}

// --- radar synthesis -------------------------------------------------------

ClutterScene make_clutter(const ScenarioConfig& cfg) {
    const auto& wf = cfg.waveform;
    const auto& noise = cfg.noise;
    ClutterScene scene;
    scene.row = Eigen::Matrix<Complex, 1, Eigen::Dynamic>::Zero(wf.subcarriers());
    if (noise.clutter_amplitude <= 0.0 || noise.clutter_scatterers == 0) return scene;

    Rng rng(derive_seed(cfg.rng_seed, kClutterStream));
    boost::random::uniform_real_distribution<double> range(noise.clutter_min_range, noise.clutter_max_range);
    boost::random::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const double df = wf.subcarrier_spacing;
    for (int i = 0; i < noise.clutter_scatterers; ++i) {
        const double r = range(rng);
        const Complex gain = std::polar(noise.clutter_amplitude, phase(rng));
        scene.ranges.push_back(r);
        scene.gains.push_back(gain);
        const double tau = 2.0 * r / kSpeedOfLight;
        const Complex base = gain * std::polar(1.0, -kTwoPi * wf.center_frequency * tau);
        const Complex step = std::polar(1.0, -kTwoPi * df * tau);
        Complex ph = base;
        for (int h = 0; h < wf.subcarriers(); ++h) {
            scene.row(h) += ph;
            ph *= step;
            if ((h & 63) == 63) {
                // Re-anchor the recurrence to keep rounding drift negligible.
                ph = base * std::polar(1.0, -kTwoPi * df * tau * (h + 1));
            }
        }
    }
    return scene;
}

radar::CsiMatrix point_target_csi(double range_3d, double doppler_velocity,
                                  const radar::WaveformConfig& wf, double amplitude) {
    const int g_n = wf.symbols();
    const int h_n = wf.subcarriers();
    const double tau = 2.0 * range_3d / kSpeedOfLight;
    const double f_d = 2.0 * doppler_velocity * wf.center_frequency / kSpeedOfLight;
    const double t_sym = wf.symbol_time();

    Eigen::Matrix<Complex, 1, Eigen::Dynamic> range_row(h_n);
    const double carrier = std::fmod(wf.center_frequency * tau, 1.0);
    for (int h = 0; h < h_n; ++h) {
        // Phase in cycles, reduced before scaling by 2 pi.
        const double cycles = carrier + std::fmod(h * wf.subcarrier_spacing * tau, 1.0);
        range_row(h) = std::polar(amplitude, -kTwoPi * cycles);
    }
    Eigen::Matrix<Complex, Eigen::Dynamic, 1> doppler_col(g_n);
    for (int g = 0; g < g_n; ++g) {
        doppler_col(g) = std::polar(1.0, kTwoPi * std::fmod(g * t_sym * f_d, 1.0));
    }
    return {doppler_col * range_row};
}

RadarView radar_view(const KinematicState& s, const SensorGeometry& geom) {
    const Eigen::Vector2d rel = s.position.vec() - geom.isac_position.vec();
    const double dh = geom.delta_h();
    const double r = std::sqrt(rel.squaredNorm() + dh * dh);
    const double range_rate = r > 0.0 ? rel.dot(s.velocity) / r : 0.0;
    return {r, -range_rate};
}

radar::CsiMatrix synthesize_csi(const Trajectory& track, const ScenarioConfig& cfg,
                                const ClutterScene& clutter, double frame_time,
                                std::uint64_t frame_index) {
    const auto& wf = cfg.waveform;
    const auto view = radar_view(track.state_at(frame_time), cfg.geometry);
    if (view.range_3d >= wf.max_unambiguous_range()) {
        throw ValidationError(fmt::format("target range {} m beyond unambiguous range {} m",
                                          view.range_3d, wf.max_unambiguous_range()));
    }
    auto csi = point_target_csi(view.range_3d, view.doppler_velocity, wf, cfg.target_amplitude);
    if (clutter.row.size() == csi.subcarriers() && !clutter.gains.empty()) {
        csi.z.rowwise() += clutter.row;
    }
    const double sigma = cfg.noise.csi_noise_std / std::numbers::sqrt2;
    if (sigma > 0.0) {
        Rng rng(derive_seed(cfg.rng_seed, kCsiStream, frame_index));
        boost::random::normal_distribution<double> n01(0.0, 1.0);
        Complex* z = csi.z.data();
        for (Eigen::Index i = 0; i < csi.z.size(); ++i) {
            const double re = n01(rng);
            const double im = n01(rng);
            z[i] += Complex(sigma * re, sigma * im);
        }
    }
    return csi;
}

// --- full run ---------------------------------------------------------------

std::string RunReport::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["frames"] = frames;
    j["frames_with_detection"] = frames - dropped.size();
    j["detections_total"] = detections_total;
    j["isac_samples"] = isac_samples;
    j["imu_samples"] = imu_samples;
    j["truth_samples"] = truth_samples;
    j["initial_pose"] = {initial_pose.x, initial_pose.y};
    j["initial_heading"] = initial_heading;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& d : dropped) {
        arr.push_back({{"index", d.index}, {"t", d.t}});
    }
    j["dropped_frames"] = std::move(arr);
    return j.dump(2) + "\n";
}

RunReport RunReport::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        RunReport r;
        r.seed = j.at("seed").get<std::uint64_t>();
        r.frames = j.at("frames").get<std::size_t>();
        r.detections_total = j.at("detections_total").get<std::size_t>();
        r.isac_samples = j.at("isac_samples").get<std::size_t>();
        r.imu_samples = j.at("imu_samples").get<std::size_t>();
        r.truth_samples = j.at("truth_samples").get<std::size_t>();
        r.initial_pose = {j.at("initial_pose").at(0).get<double>(),
                          j.at("initial_pose").at(1).get<double>()};
        r.initial_heading = j.at("initial_heading").get<double>();
        for (const auto& d : j.at("dropped_frames")) {
            r.dropped.push_back({d.at("index").get<std::size_t>(), d.at("t").get<double>()});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("run report: {}", e.what()));
    }
}

ScenarioRun run_scenario(const TrajectorySpec& spec, const ScenarioConfig& cfg) {
    auto truth = generate_truth(spec, cfg);
    const auto& track = truth.track;
    const double span = scenario_duration(track, cfg);

    ScenarioRun run;
    run.truth = std::move(truth.samples);
    run.imu = sample_imu(track, cfg);
    run.initial_pose = track.start();
    run.initial_heading = track.initial_heading();
    run.report.seed = cfg.rng_seed;
    run.report.initial_pose = run.initial_pose;
    run.report.initial_heading = run.initial_heading;

    const auto clutter = make_clutter(cfg);
    radar::ClutterFilter filter(cfg.clutter);
    const int frames = sample_count(span, cfg.isac_rate);
    for (int k = 0; k < frames; ++k) {
        const double t = k / cfg.isac_rate;
        const auto csi = synthesize_csi(track, cfg, clutter, t, static_cast<std::uint64_t>(k));
        const auto detections = radar::process_csi(csi, filter, cfg.waveform, cfg.detector);
        run.report.detections_total += detections.size();
        if (detections.empty()) {
            run.report.dropped.push_back({static_cast<std::size_t>(k), t});
            continue;
        }
        const double true_range = radar_view(track.state_at(t), cfg.geometry).range_3d;
        const auto best = std::min_element(
            detections.begin(), detections.end(), [&](const auto& a, const auto& b) {
                return std::abs(a.r - true_range) < std::abs(b.r - true_range);
            });
        run.isac.push_back({t, std::max(0.0, best->r), best->v_d});
    }
    run.report.frames = static_cast<std::size_t>(frames);
    run.report.isac_samples = run.isac.size();
    run.report.imu_samples = run.imu.size();
    run.report.truth_samples = run.truth.size();
    return run;
}

void write_run(const ScenarioRun& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "isac.csv", csv::format_isac(run.isac));
    write_file_atomic(dir / "imu.csv", csv::format_imu(run.imu));
    write_file_atomic(dir / "truth.csv", csv::format_truth(run.truth));
    write_file_atomic(dir / "report.json", run.report.to_json());
}

TrajectorySpec benchmark_trajectory(int laps) {
    TrajectorySpec spec;
    spec.waypoints = {{0.5, 0.5}, {3.0, 0.5}, {3.0, 3.0}, {0.5, 3.0}, {0.5, 0.5}};
    spec.speeds = {0.5};
    spec.dwell = {1.0};
    spec.ramp_accel = 0.5;
    spec.laps = laps;
    return spec;
}

}  // namespace isac::sim

#pragma once

// Scenario simulator standing in for the radar testbed: ground-truth
// trajectories, IMU synthesis and point-target CSI synthesis feeding the
// radar pipeline.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isacfusion/core.hpp"
#include "isacfusion/radar.hpp"

namespace isac::sim {

struct NoiseConfig {
    double accel_noise_std = 0.0;  ///< m/s^2, per axis
    double gyro_noise_std = 0.0;   ///< rad/s, per axis
    double accel_bias = 0.0;       ///< m/s^2, added to body x and y
    double gyro_bias = 0.0;        ///< rad/s, added to gyro z
    double csi_noise_std = 0.0;    ///< complex per-element std
    double clutter_amplitude = 0.0;
    int clutter_scatterers = 6;
    double clutter_min_range = 0.5;  ///< m
    double clutter_max_range = 12.0; ///< m

    void validate() const;
};

struct ScenarioConfig {
    double aoi_width = 3.5;  ///< m, AoI spans [0, width] x [0, depth]
    double aoi_depth = 3.5;
    SensorGeometry geometry;
    double isac_rate = 33.0;   ///< Hz
    double imu_rate = 50.0;    ///< Hz
    double truth_rate = 100.0; ///< Hz
    double duration = 0.0;     ///< s; 0 means "length of the trajectory"
    NoiseConfig noise;
    std::uint64_t rng_seed = 1;
    radar::WaveformConfig waveform;
    radar::ClutterConfig clutter;
    radar::DetectorConfig detector;
    double target_amplitude = 1.0;

    bool inside_aoi(const Pose2D& p) const;
    void validate() const;
};

struct TrajectorySpec {
    std::vector<Pose2D> waypoints;
    std::vector<double> speeds;  ///< m/s per segment of one lap; a single value applies to all
    std::vector<double> dwell;   ///< s per waypoint; a single value applies to all; empty = 0
    double ramp_accel = 0.5;     ///< m/s^2 for the trapezoidal speed ramps; 0 = no ramps
    int laps = 1;                ///< > 1 requires a closed path (last waypoint == first)
};

/// Kinematic state of the target at one instant (global frame).
struct KinematicState {
    double t = 0.0;
    Pose2D position;
    Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
    Eigen::Vector2d acceleration = Eigen::Vector2d::Zero();
    double heading = 0.0;   ///< rad, direction of travel, CCW from +x, unwrapped
    double yaw_rate = 0.0;  ///< rad/s
};

/// Piecewise trajectory: trapezoidal speed ramps along straight segments and
/// turn-in-place at constant yaw rate during waypoint dwells. A dwell of 0
/// with a heading change makes the heading jump.
class Trajectory {
public:
    /// Throws ValidationError naming the first waypoint outside the AoI.
    Trajectory(const TrajectorySpec& spec, const ScenarioConfig& cfg);

    double duration() const { return duration_; }
    KinematicState state_at(double t) const;
    Pose2D start() const;
    double initial_heading() const;

private:
    struct Phase {
        double t0 = 0.0;
        double duration = 0.0;
        Eigen::Vector2d p0 = Eigen::Vector2d::Zero();
        Eigen::Vector2d dir = Eigen::Vector2d::UnitX();
        double v0 = 0.0;
        double accel = 0.0;
        double heading0 = 0.0;
        double yaw_rate = 0.0;
    };
    std::vector<Phase> phases_;
    double duration_ = 0.0;
    KinematicState final_;
};

struct TruthRun {
    Trajectory track;
    std::vector<GroundTruthSample> samples;  ///< at truth_rate over [0, duration]
    std::vector<KinematicState> dense;       ///< same instants, full kinematics
};

/// Scenario span: cfg.duration if set, otherwise the trajectory length.
double scenario_duration(const Trajectory& track, const ScenarioConfig& cfg);

TruthRun generate_truth(const TrajectorySpec& spec, const ScenarioConfig& cfg);

/// IMU samples at imu_rate over [0, duration). Body accelerations are the
/// inverse of imu::rotate_to_global applied to the true global acceleration
/// at the true heading; gyro z is the yaw rate. The motion is taken at the
/// midpoint of the interval ending at each sample, so a sample reports the
/// interval average of piecewise-constant motion. Noise per cfg.noise.
std::vector<ImuMeasurement> sample_imu(const Trajectory& track, const ScenarioConfig& cfg);

/// Static scatterers (zero Doppler) shared by every frame of a run.
struct ClutterScene {
    std::vector<double> ranges;  ///< m
    std::vector<radar::Complex> gains;
    /// Per-subcarrier response sum_i gain_i exp(-j 2 pi (fc + h df) tau_i).
    Eigen::Matrix<radar::Complex, 1, Eigen::Dynamic> row;
};

ClutterScene make_clutter(const ScenarioConfig& cfg);

/// Noiseless point-target CSI:
///   Z[g,h] = b exp(-j 2 pi (fc + h df) tau) exp(+j 2 pi g T_sym f_D)
/// with tau = 2 r / c and f_D = 2 v_d fc / c (v_d > 0 approaching). The carrier
/// term keeps the target phase evolving between frames.
radar::CsiMatrix point_target_csi(double range_3d, double doppler_velocity,
                                  const radar::WaveformConfig& wf, double amplitude = 1.0);

/// Slant range and approaching radial speed of the target from the radar.
struct RadarView {
    double range_3d = 0.0;
    double doppler_velocity = 0.0;
};
RadarView radar_view(const KinematicState& s, const SensorGeometry& geom);

/// Full CSI for frame `frame_index` at `frame_time`: target + clutter + noise.
/// Throws ValidationError if the target lies beyond the unambiguous range.
radar::CsiMatrix synthesize_csi(const Trajectory& track, const ScenarioConfig& cfg,
                                const ClutterScene& clutter, double frame_time,
                                std::uint64_t frame_index);

struct DroppedFrame {
    std::size_t index = 0;
    double t = 0.0;
};

struct RunReport {
    std::uint64_t seed = 0;
    std::size_t frames = 0;
    std::size_t detections_total = 0;
    std::vector<DroppedFrame> dropped;
    std::size_t isac_samples = 0;
    std::size_t imu_samples = 0;
    std::size_t truth_samples = 0;
    Pose2D initial_pose;
    double initial_heading = 0.0;

    std::string to_json() const;
    static RunReport from_json(const std::string& text);
};

struct ScenarioRun {
    std::vector<IsacMeasurement> isac;
    std::vector<ImuMeasurement> imu;
    std::vector<GroundTruthSample> truth;
    RunReport report;
    Pose2D initial_pose;
    double initial_heading = 0.0;
};

/// One CSI frame per 1/isac_rate through the radar pipeline; the detection
/// nearest the true slant range becomes that frame's IsacMeasurement.
/// Frames without detections are listed in the report.
ScenarioRun run_scenario(const TrajectorySpec& spec, const ScenarioConfig& cfg);

/// Write isac.csv, imu.csv, truth.csv and report.json into `dir`.
void write_run(const ScenarioRun& run, const std::filesystem::path& dir);

// Config files (JSON). Angles are given in degrees (`azimuth_deg`,
// `elevation_deg`); unknown keys are rejected.
ScenarioConfig load_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_config(const std::string& json_text);
std::string scenario_config_to_json(const ScenarioConfig& cfg);
TrajectorySpec load_trajectory(const std::filesystem::path& path);
TrajectorySpec parse_trajectory(const std::string& json_text);
std::string trajectory_to_json(const TrajectorySpec& spec);

/// The 3.5 m x 3.5 m rectangular loop used for benchmarking. Segment timing
/// lands on the 50 Hz IMU grid.
TrajectorySpec benchmark_trajectory(int laps = 1);

}  // namespace isac::sim

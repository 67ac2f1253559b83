#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "isacfusion/csv.hpp"
#include "isacfusion/fileio.hpp"
#include "isacfusion/imu.hpp"
#include "isacfusion/radar.hpp"
#include "isacfusion/sim.hpp"

using namespace isac;
using namespace isac::sim;

namespace {

TrajectorySpec line(Pose2D a, Pose2D b, double speed, double ramp = 0.0) {
    TrajectorySpec s;
    s.waypoints = {a, b};
    s.speeds = {speed};
    s.ramp_accel = ramp;
    return s;
}

// Cheap waveform for whole-run tests.
ScenarioConfig fast_config() {
    ScenarioConfig cfg;
    cfg.waveform.num_symbols = 32;
    cfg.waveform.num_subcarriers = 256;
    return cfg;
}

}  // namespace

TEST(Trajectory, UniformMotionMidpoint) {
    const Trajectory tr(line({0, 0}, {1, 0}, 1.0), ScenarioConfig{});
    const auto s = tr.state_at(0.5);
    EXPECT_NEAR(s.position.x, 0.5, 1e-12);
    EXPECT_NEAR(s.position.y, 0.0, 1e-12);
    EXPECT_NEAR(tr.duration(), 1.0, 1e-12);
}

TEST(Trajectory, DwellHasZeroVelocityAndAcceleration) {
    TrajectorySpec spec = line({1, 1}, {2, 1}, 0.5, 0.5);
    spec.dwell = {2.0, 0.0};
    const Trajectory tr(spec, ScenarioConfig{});
    for (double t : {0.0, 0.5, 1.0, 1.99}) {
        const auto s = tr.state_at(t);
        EXPECT_EQ(s.velocity, Eigen::Vector2d::Zero());
        EXPECT_EQ(s.acceleration, Eigen::Vector2d::Zero());
        EXPECT_EQ(s.position, (Pose2D{1, 1}));
    }
}

TEST(Trajectory, HeadingTurnsAtCorner) {
    TrajectorySpec spec;
    spec.waypoints = {{0, 0}, {1, 0}, {1, 1}};
    spec.speeds = {1.0};
    spec.ramp_accel = 0.0;
    const Trajectory tr(spec, ScenarioConfig{});
    EXPECT_NEAR(tr.state_at(0.5).heading, 0.0, 1e-12);
    EXPECT_NEAR(tr.state_at(1.5).heading, std::numbers::pi / 2, 1e-12);
}

TEST(Trajectory, TrapezoidalRampsReachCruiseSpeed) {
    const Trajectory tr(line({0, 1}, {3, 1}, 0.5, 0.5), ScenarioConfig{});
    EXPECT_NEAR(tr.state_at(0.5).velocity.x(), 0.25, 1e-12);
    EXPECT_NEAR(tr.state_at(0.5).acceleration.x(), 0.5, 1e-12);
    EXPECT_NEAR(tr.state_at(3.0).velocity.x(), 0.5, 1e-12);
    EXPECT_NEAR(tr.state_at(tr.duration()).position.x, 3.0, 1e-12);
    EXPECT_NEAR(tr.state_at(tr.duration()).velocity.norm(), 0.0, 1e-12);
}

TEST(Trajectory, RejectsWaypointOutsideAoiByIndex) {
    try {
        Trajectory(line({1, 1}, {5, 1}, 1.0), ScenarioConfig{});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("waypoint 1"), std::string::npos);
    }
}

TEST(Trajectory, RejectsBadSpecs) {
    TrajectorySpec one;
    one.waypoints = {{1, 1}};
    one.speeds = {1.0};
    EXPECT_THROW(Trajectory(one, ScenarioConfig{}), ValidationError);
    EXPECT_THROW(Trajectory(line({1, 1}, {2, 1}, 0.0), ScenarioConfig{}), ValidationError);
    auto open = line({1, 1}, {2, 1}, 1.0);
    open.laps = 2;
    EXPECT_THROW(Trajectory(open, ScenarioConfig{}), ValidationError);
}

TEST(SampleImu, ConstantVelocityIsQuiet) {
    ScenarioConfig cfg;
    const Trajectory tr(line({0, 1}, {3, 1}, 1.0), cfg);
    for (const auto& m : sample_imu(tr, cfg)) {
        EXPECT_EQ(m.accel_body, Eigen::Vector3d::Zero());
        EXPECT_EQ(m.gyro.z(), 0.0);
    }
}

TEST(SampleImu, BodyAccelerationInvertsPrintedRotation) {
    const Eigen::Vector2d global{1.0, 0.0};
    const double phi = std::numbers::pi / 2;
    const Eigen::Vector2d body = imu::rotate_to_body(global, phi);
    EXPECT_NEAR(body.x(), 0.0, 1e-12);
    EXPECT_NEAR(body.y(), 1.0, 1e-12);
    EXPECT_NEAR((imu::rotate_to_global(body, phi) - global).norm(), 0.0, 1e-12);

    ScenarioConfig cfg;
    const Trajectory tr(line({1, 0.5}, {1, 3}, 0.5, 0.5), cfg);
    const auto imu = sample_imu(tr, cfg);
    const auto s = tr.state_at(imu[10].t);
    EXPECT_NEAR((imu::rotate_to_global(imu[10].accel_body.head<2>(), s.heading) - s.acceleration).norm(),
                0.0, 1e-12);
}

TEST(SampleImu, GyroBiasOffsetsYawRate) {
    ScenarioConfig cfg;
    cfg.noise.accel_noise_std = 0.0;
    cfg.noise.gyro_noise_std = 0.0;
    cfg.noise.gyro_bias = 0.01;
    const Trajectory tr(line({1, 1}, {1, 3}, 0.5), cfg);
    for (const auto& m : sample_imu(tr, cfg)) EXPECT_NEAR(m.gyro.z(), 0.01, 1e-15);
    EXPECT_THROW(parse_scenario_config(R"({"noise": {"gyro_bias": "x"}})"), std::exception);
}

TEST(SampleImu, NoiseStdMatchesConfig) {
    ScenarioConfig cfg;
    cfg.noise.accel_noise_std = 0.1;
    cfg.duration = 202.0;
    const Trajectory tr(line({1, 1}, {1.01, 1}, 1.0), cfg);
    const auto imu = sample_imu(tr, cfg);
    double sum = 0.0;
    double sq = 0.0;
    int n = 0;
    for (const auto& m : imu) {
        if (m.t < 2.0) continue;
        sum += m.accel_body.x();
        sq += m.accel_body.x() * m.accel_body.x();
        ++n;
    }
    ASSERT_EQ(n, 10000);
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(sd, 0.1, 0.005);
}

TEST(SampleImu, DoubleIntegrationReproducesTruth) {
    ScenarioConfig cfg;
    const auto spec = benchmark_trajectory(1);
    const Trajectory tr(spec, cfg);
    const auto imu = sample_imu(tr, cfg);
    const double dt = 1.0 / cfg.imu_rate;
    double worst = 0.0;
    for (std::size_t start = 0; start + 50 < imu.size(); start += 25) {
        const auto s0 = tr.state_at(imu[start].t);
        Eigen::Vector2d p = s0.position.vec();
        Eigen::Vector2d v = s0.velocity;
        double yaw = s0.heading;
        for (std::size_t k = start + 1; k <= start + 50; ++k) {
            yaw += imu[k].gyro.z() * dt;
            const Eigen::Vector2d a = imu::rotate_to_global(imu[k].accel_body.head<2>(), yaw);
            p += v * dt + 0.5 * a * dt * dt;
            v += a * dt;
        }
        worst = std::max(worst, (p - tr.state_at(imu[start + 50].t).position.vec()).norm());
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(SampleImu, DistanceSumMatchesStraightPathLength) {
    ScenarioConfig cfg;
    const Trajectory tr(line({0.5, 1}, {3, 1}, 0.5, 0.5), cfg);
    const auto imu = sample_imu(tr, cfg);
    imu::DistanceTracker dist(tr.initial_heading());
    double total = 0.0;
    for (const auto& m : imu) total += dist.push(m).d_imu;
    EXPECT_NEAR(total, 2.5, 0.01 * 2.5);
}

TEST(SynthesizeCsi, RangeBinFourPeak) {
    const radar::WaveformConfig wf;
    const double r = 4.0 * wf.range_bin_width();
    const auto csi = point_target_csi(r, 0.0, wf);
    const auto map = radar::range_doppler(csi, wf);
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    const double peak = map.magnitudes.maxCoeff(&row, &col);
    EXPECT_EQ(col, 4);
    EXPECT_EQ(map.doppler_bin(row), 0);
    double off_doppler = 0.0;
    for (Eigen::Index r2 = 0; r2 < map.magnitudes.rows(); ++r2) {
        if (r2 != map.zero_doppler_row()) off_doppler = std::max(off_doppler, map.magnitudes.row(r2).maxCoeff());
    }
    EXPECT_LT(off_doppler, 1e-9 * peak);
}

TEST(SynthesizeCsi, SameSeedIsBitIdentical) {
    ScenarioConfig cfg = fast_config();
    cfg.noise.csi_noise_std = 0.5;
    cfg.noise.clutter_amplitude = 1.0;
    const Trajectory tr(line({0.5, 1}, {3, 1}, 0.5, 0.5), cfg);
    const auto scene = make_clutter(cfg);
    const auto a = synthesize_csi(tr, cfg, scene, 1.0, 33);
    const auto b = synthesize_csi(tr, cfg, make_clutter(cfg), 1.0, 33);
    EXPECT_EQ(a.z, b.z);
    cfg.rng_seed = 2;
    EXPECT_NE(synthesize_csi(tr, cfg, make_clutter(cfg), 1.0, 33).z, a.z);
}

TEST(SynthesizeCsi, RejectsTargetBeyondUnambiguousRange) {
    ScenarioConfig cfg;
    cfg.waveform.subcarrier_spacing = 120e6;
    cfg.waveform.bandwidth = 2e9;
    cfg.waveform.num_subcarriers = 4;
    const Trajectory tr(line({3, 3}, {3.4, 3.4}, 0.5), cfg);
    EXPECT_THROW(synthesize_csi(tr, cfg, make_clutter(cfg), 0.0, 0), ValidationError);
}

TEST(RunScenario, TenSecondRates) {
    ScenarioConfig cfg = fast_config();
    cfg.duration = 10.0;
    const auto run = run_scenario(line({0.5, 1}, {3, 1}, 0.5, 0.5), cfg);
    EXPECT_LE(run.isac.size(), 330u);
    EXPECT_EQ(run.imu.size(), 500u);
    EXPECT_EQ(run.report.frames, 330u);
    EXPECT_EQ(run.report.frames, run.report.isac_samples + run.report.dropped.size());
    EXPECT_EQ(run.truth.size(), 1001u);
}

TEST(RunScenario, NoiselessRangeWithinOneBin) {
    ScenarioConfig cfg;
    cfg.duration = 2.0;
    const auto spec = line({0.5, 1}, {3, 1}, 0.5, 0.5);
    const auto run = run_scenario(spec, cfg);
    const Trajectory tr(spec, cfg);
    ASSERT_FALSE(run.isac.empty());
    for (const auto& m : run.isac) {
        const double truth = radar_view(tr.state_at(m.t), cfg.geometry).range_3d;
        EXPECT_LE(std::abs(m.range_3d - truth), cfg.waveform.range_bin_width());
    }
}

TEST(RunScenario, SameSeedSameFiles) {
    ScenarioConfig cfg = fast_config();
    cfg.noise.csi_noise_std = 0.3;
    cfg.noise.clutter_amplitude = 1.0;
    cfg.noise.accel_noise_std = 0.05;
    cfg.duration = 3.0;
    const auto spec = line({0.5, 1}, {3, 1}, 0.5, 0.5);
    const auto dir = std::filesystem::temp_directory_path() / "isacfusion_sim_det";
    write_run(run_scenario(spec, cfg), dir / "a");
    write_run(run_scenario(spec, cfg), dir / "b");
    for (const char* f : {"isac.csv", "imu.csv", "truth.csv", "report.json"}) {
        EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
    }
    std::filesystem::remove_all(dir);
}

TEST(RunReport, JsonRoundTrip) {
    RunReport r;
    r.seed = 9;
    r.frames = 10;
    r.detections_total = 12;
    r.dropped = {{3, 0.09}, {4, 0.12}};
    r.isac_samples = 8;
    r.imu_samples = 15;
    r.truth_samples = 31;
    r.initial_pose = {0.5, 0.25};
    r.initial_heading = 1.5;
    const auto back = RunReport::from_json(r.to_json());
    EXPECT_EQ(back.to_json(), r.to_json());
    EXPECT_THROW(RunReport::from_json("{}"), ValidationError);
}

TEST(ScenarioConfigFile, RoundTripAndUnknownKeys) {
    ScenarioConfig cfg;
    cfg.noise.csi_noise_std = 3.5;
    cfg.geometry.isac_position = {-2.0, 0.5};
    cfg.rng_seed = 77;
    const auto text = scenario_config_to_json(cfg);
    const auto back = parse_scenario_config(text);
    EXPECT_EQ(scenario_config_to_json(back), text);
    EXPECT_EQ(back.geometry.isac_position, cfg.geometry.isac_position);
    EXPECT_THROW(parse_scenario_config(R"({"bogus": 1})"), ValidationError);
    EXPECT_THROW(parse_scenario_config(R"({"noise": {"csi_noise_std": -1}})"), ValidationError);
}

TEST(TrajectoryFile, RoundTrip) {
    const auto spec = benchmark_trajectory(2);
    const auto back = parse_trajectory(trajectory_to_json(spec));
    EXPECT_EQ(trajectory_to_json(back), trajectory_to_json(spec));
    EXPECT_EQ(back.laps, 2);
    EXPECT_THROW(parse_trajectory(R"({"waypoints": [[0, 0]], "speed": 1})"), ValidationError);
}

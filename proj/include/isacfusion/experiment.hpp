#pragma once

// End-to-end benchmark pipeline shared by the CLI and the acceptance suite:
// simulate a training run and a test run per seed, train the fusion model and
// score every positioning method against truth.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isacfusion/ekf.hpp"
#include "isacfusion/eval.hpp"
#include "isacfusion/fusion.hpp"
#include "isacfusion/nn.hpp"
#include "isacfusion/sim.hpp"

namespace isac::experiment {

enum class Method { DnnFusion, DnnIsac, EkfFusion, Geometric };

inline constexpr Method kAllMethods[] = {Method::DnnFusion, Method::DnnIsac, Method::EkfFusion,
                                         Method::Geometric};

/// "dnn-fusion", "dnn-isac", "ekf-fusion", "geometric"
std::string method_name(Method m);
/// Throws ValidationError listing the accepted names.
Method parse_method(const std::string& name);
bool needs_model(Method m);

struct EkfParams {
    double accel_std = 0.05;  ///< m/s^2, drives Q
    double range_std = 0.05;  ///< m, sqrt(R)
};

EkfParams parse_ekf_params(const std::string& json_text);
EkfParams load_ekf_params(const std::filesystem::path& path);
std::string ekf_params_to_json(const EkfParams& p);

/// Grid search over accel_std x range_std minimising the mean error of the
/// EKF on a run with truth. Ties keep the earlier grid point.
EkfParams tune_ekf(const sim::ScenarioRun& run, const SensorGeometry& geom,
                   double range_clamp_tolerance);

/// Training-time settings stored in the train-config file.
struct TrainSettings {
    nn::TrainConfig nn;
    fusion::DatasetOptions dataset;
};

TrainSettings parse_train_settings(const std::string& json_text);
TrainSettings load_train_settings(const std::filesystem::path& path);
std::string train_settings_to_json(const TrainSettings& s);

struct Manifest {
    std::filesystem::path scenario;    ///< empty = built-in defaults
    std::filesystem::path trajectory;  ///< empty = benchmark loop
    std::filesystem::path train_config;
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods;
    std::filesystem::path output;
    int train_laps = 2;
    /// Fixed EKF noise; when absent the EKF is tuned on each training run.
    std::optional<EkfParams> ekf;
};

/// Relative paths resolve against `base_dir`. Throws ValidationError.
Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

/// The calibrated benchmark scenario.
sim::ScenarioConfig benchmark_scenario();

/// Training settings calibrated for the benchmark scenario.
TrainSettings benchmark_train_settings();

/// Seed used for the training run paired with test seed `seed`.
std::uint64_t training_seed(std::uint64_t seed);

fusion::FusionTraining train_on_run(const sim::ScenarioRun& run, const sim::ScenarioConfig& cfg,
                                    const TrainSettings& settings);

/// Re-anchors a trained model at the start of a measurement run.
fusion::FusionModel anchored(const fusion::FusionModel& model, const Pose2D& initial_pose,
                             double initial_heading);

/// Position estimates of one method on a run. `model` is required for the
/// DNN methods (ValidationError otherwise).
std::vector<TimedPose> estimate(Method method, std::span<const IsacMeasurement> isac,
                                std::span<const ImuMeasurement> imu, const Pose2D& initial_pose,
                                double initial_heading, const SensorGeometry& geom,
                                const fusion::FusionModel* model, const EkfParams& ekf);

struct SeedResult {
    std::uint64_t seed = 0;
    std::map<Method, eval::ErrorSeries> errors;
    fusion::FusionTraining training;
    EkfParams ekf;
};

/// Simulates training (`train_laps` laps, training_seed(seed)) and test
/// (`test_spec`, seed) runs, trains and evaluates the requested methods.
/// Without fixed `ekf` parameters the EKF is tuned on the training run.
SeedResult run_seed(const sim::ScenarioConfig& cfg, const sim::TrajectorySpec& test_spec,
                    int train_laps, const TrainSettings& settings, std::span<const Method> methods,
                    const std::optional<EkfParams>& ekf, std::uint64_t seed);

struct Aggregate {
    std::vector<eval::SummaryRow> per_seed_rows;  ///< method label "name@seed"
    eval::Summary mean;  ///< seed-averaged average and p90 per method
};

Aggregate aggregate(std::span<const SeedResult> results, std::span<const Method> methods);

}  // namespace isac::experiment

#pragma once

// Two-stage cascaded network fusion of radar (range, Doppler) and IMU
// travelled-distance measurements.
//
// Stage 1 maps [previous final x, previous final y, r_2d, v_D] to an initial
// position whenever a radar sample arrives. Stage 2 maps [position, d_imu] to
// the final position on every IMU sample; its position input is the stage-1
// output if one was produced since the previous IMU sample, otherwise the
// previous final estimate.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isacfusion/core.hpp"
#include "isacfusion/nn.hpp"

namespace isac::fusion {

inline const std::vector<int> kStage1Layers{4, 32, 16, 2};
inline const std::vector<int> kStage2Layers{3, 32, 16, 2};

struct Stage1Input {
    Pose2D prev_final;
    double r = 0.0;  ///< horizontal range, m
    double v_d = 0.0;

    Eigen::Vector4d features() const { return {prev_final.x, prev_final.y, r, v_d}; }
};

struct Stage2Input {
    Pose2D initial_estimate;
    double d_imu = 0.0;

    Eigen::Vector3d features() const { return {initial_estimate.x, initial_estimate.y, d_imu}; }
};

struct FusionEstimate {
    double t = 0.0;
    Pose2D final_position;
    bool stage1_used = false;

    friend bool operator==(const FusionEstimate&, const FusionEstimate&) = default;
};

struct DatasetOptions {
    /// Slant ranges up to this far below the height difference project to 0.
    double range_clamp_tolerance = 0.75;
    /// Yaw used to start the IMU dead-reckoning.
    double initial_heading = 0.0;
    /// Perturb teacher-forced previous positions with Gaussian noise.
    bool inject_prev_noise = false;
    double stage1_prev_noise_std = 0.02;  ///< m
    double stage2_prev_noise_std = 0.02;  ///< m
    /// Noisy replicas of every row when noise injection is on.
    int noise_copies = 1;
    /// Replica c uses std * 2^-c instead of std for every replica.
    bool noise_ladder = false;
    std::uint64_t noise_seed = 17;
};

struct TrainingSets {
    nn::Dataset stage1;
    nn::Dataset stage2;
};

/// Teacher-forced training rows.
///
/// Stage 1: for each radar sample after the first, input
/// [truth(t_prev).x, truth(t_prev).y, r_2d, v_D] and target truth(t), where
/// t_prev is the previous radar timestamp. Stage 2: for each IMU sample after
/// the first, input [truth(t_prev).x, truth(t_prev).y, d_imu] and target
/// truth(t). Truth is linearly interpolated; samples outside the truth span
/// are skipped. Throws ValidationError if no rows can be formed.
TrainingSets build_training_set(std::span<const IsacMeasurement> isac,
                                std::span<const ImuMeasurement> imu,
                                std::span<const GroundTruthSample> truth,
                                const SensorGeometry& geom, const DatasetOptions& opts = {});

struct FusionModel {
    nn::Model stage1;
    nn::Model stage2;
    Pose2D initial_pose;
    double initial_heading = 0.0;
    double time_origin = 0.0;
    SensorGeometry geometry;
    double range_clamp_tolerance = 0.75;
    DatasetOptions dataset_options;
};

struct FusionTraining {
    FusionModel model;
    nn::TrainResult stage1;
    nn::TrainResult stage2;
};

struct ModelContext {
    Pose2D initial_pose;
    double initial_heading = 0.0;
    double time_origin = 0.0;
    SensorGeometry geometry;
    DatasetOptions dataset_options;
};

/// Trains both stages independently. Throws ValidationError on an empty set.
FusionTraining train_fusion(const TrainingSets& sets, const nn::TrainConfig& cfg,
                            const ModelContext& ctx);

/// Runs the cascade over merged events. Emits exactly one estimate per IMU
/// event. Radar samples whose slant range cannot be projected are ignored.
/// Throws ValidationError on an event before the model's time origin.
std::vector<FusionEstimate> infer(const FusionModel& model, std::span<const Event> events);

/// Stage 1 alone, fed back with its own previous output. One estimate per
/// radar sample; the first uses the model's initial pose.
std::vector<FusionEstimate> infer_isac_only(const FusionModel& model,
                                            std::span<const IsacMeasurement> isac);

std::string fusion_model_to_json(const FusionModel& model);
FusionModel fusion_model_from_json(const std::string& text);
void save_fusion_model(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_fusion_model(const std::filesystem::path& path);

/// `t,px,py,stage1_used`
std::string format_estimates(std::span<const FusionEstimate> estimates);

std::vector<TimedPose> as_timed_poses(std::span<const FusionEstimate> estimates);

}  // namespace isac::fusion

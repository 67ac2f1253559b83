#pragma once

// Planar IMU kinematics: body-to-global rotation, total acceleration and the
// per-sample travelled distance d_imu = v*dt + a_g*dt^2/2.

#include <Eigen/Core>

#include <optional>

#include "isacfusion/core.hpp"

namespace isac::imu {

/// Rotate a body-frame planar acceleration into the global frame:
///
///   [ax]   [ cos(phi)  sin(phi)] [ax]
///   [ay] = [-sin(phi)  cos(phi)] [ay]
///       g                          l
Eigen::Vector2d rotate_to_global(const Eigen::Vector2d& accel_body, double phi);

/// Exact inverse of rotate_to_global.
Eigen::Vector2d rotate_to_body(const Eigen::Vector2d& accel_global, double phi);

/// a_g = |a|
double total_acceleration(const Eigen::Vector2d& accel_global);

struct ImuState {
    double yaw_phi = 0.0;     ///< rad
    double velocity_v = 0.0;  ///< m/s, never negative
    double last_t = 0.0;
};

struct DistanceIncrement {
    double d_imu = 0.0;
    double dt = 0.0;
};

struct StepResult {
    ImuState state;
    DistanceIncrement increment;
};

/// Advance the dead-reckoning state by one IMU sample.
///
/// Yaw is integrated from g_z only. Speed integrates the global acceleration
/// component along the current heading and is clamped at zero (the vehicle
/// does not reverse). Throws ValidationError if m.t <= state.last_t.
StepResult step(const ImuState& state, const ImuMeasurement& m);

/// Runs `step` over a whole stream. The first sample only anchors the clock
/// and yields d_imu = 0, so the output has one increment per input sample.
class DistanceTracker {
public:
    explicit DistanceTracker(double initial_yaw = 0.0, double initial_speed = 0.0)
        : initial_yaw_(initial_yaw), initial_speed_(initial_speed) {}

    DistanceIncrement push(const ImuMeasurement& m);
    const std::optional<ImuState>& state() const { return state_; }

private:
    double initial_yaw_;
    double initial_speed_;
    std::optional<ImuState> state_;
};

}  // namespace isac::imu

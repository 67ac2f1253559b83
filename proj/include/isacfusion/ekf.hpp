#pragma once

// Extended Kalman filter baseline: constant-velocity motion driven by
// global-frame IMU accelerations, corrected by horizontal radar ranges.

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "isacfusion/core.hpp"

namespace isac::ekf {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

struct EkfState {
    Vector4 x = Vector4::Zero();  ///< [px, py, vx, vy]
    Matrix4 E = Matrix4::Identity();

    Pose2D position() const { return {x(0), x(1)}; }
};

/// State-transition matrix C and control matrix D for a step of length dt.
Matrix4 transition(double dt);
Eigen::Matrix<double, 4, 2> control(double dt);

/// Process noise is either a fixed Q or Q = D diag(sa^2, sa^2) D^T per step.
class EkfNoise {
public:
    /// Throws ValidationError unless Q is symmetric PSD and R > 0.
    static EkfNoise fixed(const Matrix4& q, double range_variance);
    /// Throws ValidationError unless accel_std >= 0 and R > 0.
    static EkfNoise acceleration_driven(double accel_std, double range_variance);

    Matrix4 process_covariance(double dt) const;
    double range_variance() const { return r_; }

private:
    EkfNoise() = default;
    bool fixed_ = true;
    Matrix4 q_ = Matrix4::Zero();
    double accel_std_ = 0.0;
    double r_ = 1.0;
};

/// x <- C x + D u, E <- C E C^T + Q, then E <- (E + E^T) / 2.
/// Throws ValidationError if dt <= 0.
EkfState predict(const EkfState& s, const Eigen::Vector2d& u, double dt, const EkfNoise& noise);

struct UpdateResult {
    EkfState state;
    bool applied = false;  ///< false when the prediction sits on the sensor
    Eigen::Vector4d gain = Eigen::Vector4d::Zero();
};

/// Range update with h = |p_isac - p|, J = [(p - p_isac)^T / h, 0, 0],
/// o = r_2d - h, K = E J^T (J E J^T + R)^-1, x += K o, E <- (I - K J) E
/// evaluated in Joseph form.
/// Skipped when h < 1e-9.
UpdateResult update_range(const EkfState& s, double r_2d, const Pose2D& isac_position,
                          const EkfNoise& noise);

struct EkfRunOptions {
    double initial_heading = 0.0;
    double range_clamp_tolerance = 0.75;
};

struct EkfRunResult {
    std::vector<TimedPose> estimates;  ///< one per processed event
    std::size_t skipped_updates = 0;
    EkfState final_state;
};

/// Runs the filter over the merged streams. IMU samples rotate the body
/// acceleration to the global frame with the gyro-integrated yaw; that
/// acceleration is held as the control input until the next IMU sample.
/// Radar samples predict to their timestamp and apply a range update.
/// The initial state is taken at the time of the first event.
EkfRunResult run_ekf(std::span<const IsacMeasurement> isac, std::span<const ImuMeasurement> imu,
                     const SensorGeometry& geom, const EkfNoise& noise, const EkfState& initial,
                     const EkfRunOptions& opts = {});

/// Initial covariance diag(0.01, 0.01, 0.1, 0.1) at rest at `start`.
EkfState initial_state(const Pose2D& start);

/// `t,px,py`
std::string format_estimates(std::span<const TimedPose> estimates);

}  // namespace isac::ekf

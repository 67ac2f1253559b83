#include "isacfusion/imu.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace isac::imu {

Eigen::Vector2d rotate_to_global(const Eigen::Vector2d& accel_body, double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {c * accel_body.x() + s * accel_body.y(), -s * accel_body.x() + c * accel_body.y()};
}

Eigen::Vector2d rotate_to_body(const Eigen::Vector2d& accel_global, double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {c * accel_global.x() - s * accel_global.y(), s * accel_global.x() + c * accel_global.y()};
}

double total_acceleration(const Eigen::Vector2d& accel_global) {
    return std::hypot(accel_global.x(), accel_global.y());
}

StepResult step(const ImuState& state, const ImuMeasurement& m) {
    if (!(m.t > state.last_t)) {
        throw ValidationError(
            fmt::format("IMU timestamp {} does not advance past {}", m.t, state.last_t));
    }
    const double dt = m.t - state.last_t;

    ImuState next = state;
    next.yaw_phi = state.yaw_phi + m.gyro.z() * dt;
    next.last_t = m.t;

    const Eigen::Vector2d a_global = rotate_to_global(m.accel_body.head<2>(), next.yaw_phi);
    const double a_g = total_acceleration(a_global);
    const double d_imu = state.velocity_v * dt + 0.5 * a_g * dt * dt;

    const double along_heading =
        a_global.x() * std::cos(next.yaw_phi) + a_global.y() * std::sin(next.yaw_phi);
    next.velocity_v = std::max(0.0, state.velocity_v + along_heading * dt);

    return {next, {d_imu, dt}};
}

DistanceIncrement DistanceTracker::push(const ImuMeasurement& m) {
    if (!state_) {
        state_ = ImuState{initial_yaw_, initial_speed_, m.t};
        return {0.0, 0.0};
    }
    auto [next, inc] = step(*state_, m);
    state_ = next;
    return inc;
}

}  // namespace isac::imu

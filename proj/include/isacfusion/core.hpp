#pragma once

// Shared measurement types and stream plumbing.
//
// Time is carried as seconds (double) relative to scenario start. Angles are
// radians everywhere inside the library.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "isacfusion/error.hpp"

namespace isac {

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct Pose2D {
    double x = 0.0;
    double y = 0.0;

    Eigen::Vector2d vec() const { return {x, y}; }
    static Pose2D from(const Eigen::Vector2d& v) { return {v.x(), v.y()}; }

    friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// A position estimate (or truth sample) at one instant.
struct TimedPose {
    double t = 0.0;
    Pose2D position;

    friend bool operator==(const TimedPose&, const TimedPose&) = default;
};

/// Range / Doppler pair reported by the radar front end.
struct IsacMeasurement {
    double t = 0.0;
    double range_3d = 0.0;          ///< meters
    double doppler_velocity = 0.0;  ///< m/s, positive = approaching

    friend bool operator==(const IsacMeasurement&, const IsacMeasurement&) = default;
};

struct ImuMeasurement {
    double t = 0.0;
    Eigen::Vector3d accel_body = Eigen::Vector3d::Zero();  ///< m/s^2
    Eigen::Vector3d gyro = Eigen::Vector3d::Zero();        ///< rad/s

    friend bool operator==(const ImuMeasurement& a, const ImuMeasurement& b) {
        return a.t == b.t && a.accel_body == b.accel_body && a.gyro == b.gyro;
    }
};

struct GroundTruthSample {
    double t = 0.0;
    Pose2D position;

    friend bool operator==(const GroundTruthSample&, const GroundTruthSample&) = default;
};

/// Placement of the radar and the height of the tracked target.
///
/// `elevation` is carried for completeness; the planar model does not use it.
struct SensorGeometry {
    Pose2D isac_position{-1.0, 0.0};
    double isac_height = 1.9;
    double target_height = 0.9;
    double azimuth = 0.0;
    double elevation = -6.0 * 3.14159265358979323846 / 180.0;  // -6 deg down-tilt

    double delta_h() const { return isac_height - target_height; }
};

enum class Source { Imu, Isac };

/// One entry of a merged, time-ordered measurement sequence.
struct Event {
    std::variant<ImuMeasurement, IsacMeasurement> data;

    Source source() const {
        return std::holds_alternative<ImuMeasurement>(data) ? Source::Imu : Source::Isac;
    }
    double t() const {
        return std::visit([](const auto& m) { return m.t; }, data);
    }
    const ImuMeasurement& imu() const { return std::get<ImuMeasurement>(data); }
    const IsacMeasurement& isac() const { return std::get<IsacMeasurement>(data); }
};

/// Merge two individually sorted streams into one time-ordered sequence.
/// On equal timestamps the IMU sample comes first.
/// Throws StreamOrderError naming the offending stream and index.
std::vector<Event> merge_streams(std::span<const IsacMeasurement> isac,
                                 std::span<const ImuMeasurement> imu);

/// Linear interpolation of a time-sorted truth stream; nullopt outside its span.
std::optional<Pose2D> interpolate_position(std::span<const GroundTruthSample> truth, double t);

/// Throws StreamOrderError if timestamps decrease or are not finite.
template <typename T>
void check_time_order(std::span<const T> stream, const char* name) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const double t = stream[i].t;
        if (!std::isfinite(t) || (i > 0 && t < stream[i - 1].t)) {
            throw StreamOrderError(name, i);
        }
    }
}

inline constexpr double deg2rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

}  // namespace isac

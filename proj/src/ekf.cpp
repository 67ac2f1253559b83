#include "isacfusion/ekf.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <cmath>

#include "isacfusion/error.hpp"
#include "isacfusion/geometry.hpp"
#include "isacfusion/imu.hpp"

namespace isac::ekf {
namespace {

void symmetrize(Matrix4& e) { e = (0.5 * (e + e.transpose())).eval(); }

}  // namespace

Matrix4 transition(double dt) {
    Matrix4 c = Matrix4::Identity();
    c(0, 2) = dt;
    c(1, 3) = dt;
    return c;
}

Eigen::Matrix<double, 4, 2> control(double dt) {
    Eigen::Matrix<double, 4, 2> d = Eigen::Matrix<double, 4, 2>::Zero();
    d(0, 0) = 0.5 * dt * dt;
    d(1, 1) = 0.5 * dt * dt;
    d(2, 0) = dt;
    d(3, 1) = dt;
    return d;
}

EkfNoise EkfNoise::fixed(const Matrix4& q, double range_variance) {
    if (!(range_variance > 0.0) || !std::isfinite(range_variance)) {
        throw ValidationError(fmt::format("EKF range variance must be positive, got {}", range_variance));
    }
    if (!q.allFinite()) throw ValidationError("EKF process covariance must be finite");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ValidationError("EKF process covariance must be symmetric");
    }
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix4>(q).eigenvalues().minCoeff();
    if (min_eig < -1e-12) {
        throw ValidationError(fmt::format("EKF process covariance is not PSD (min eigenvalue {})", min_eig));
    }
    EkfNoise n;
    n.fixed_ = true;
    n.q_ = q;
    n.r_ = range_variance;
    return n;
}

EkfNoise EkfNoise::acceleration_driven(double accel_std, double range_variance) {
    if (!(accel_std >= 0.0) || !std::isfinite(accel_std)) {
        throw ValidationError(fmt::format("EKF acceleration std must be >= 0, got {}", accel_std));
    }
    if (!(range_variance > 0.0) || !std::isfinite(range_variance)) {
        throw ValidationError(fmt::format("EKF range variance must be positive, got {}", range_variance));
    }
    EkfNoise n;
    n.fixed_ = false;
    n.accel_std_ = accel_std;
    n.r_ = range_variance;
    return n;
}

Matrix4 EkfNoise::process_covariance(double dt) const {
    if (fixed_) return q_;
    const auto d = control(dt);
    return accel_std_ * accel_std_ * d * d.transpose();
}

EkfState predict(const EkfState& s, const Eigen::Vector2d& u, double dt, const EkfNoise& noise) {
    if (!(dt > 0.0)) throw ValidationError(fmt::format("EKF predict needs dt > 0, got {}", dt));
    const Matrix4 c = transition(dt);
    EkfState out;
    out.x = c * s.x + control(dt) * u;
    out.E = c * s.E * c.transpose() + noise.process_covariance(dt);
    symmetrize(out.E);
    return out;
}

UpdateResult update_range(const EkfState& s, double r_2d, const Pose2D& isac_position,
                          const EkfNoise& noise) {
    const Eigen::Vector2d diff = s.x.head<2>() - isac_position.vec();
    const double h = diff.norm();
    if (h < 1e-9) return {s, false, Vector4::Zero()};

    Eigen::RowVector4d j = Eigen::RowVector4d::Zero();
    j.head<2>() = diff.transpose() / h;
    const double innovation_var = (j * s.E * j.transpose())(0, 0) + noise.range_variance();
    const Vector4 k = s.E * j.transpose() / innovation_var;
    const double o = r_2d - h;

    UpdateResult out;
    out.applied = true;
    out.gain = k;
    out.state.x = s.x;
    if (o != 0.0) out.state.x += k * o;
    // Joseph form: equal to (I - K J) E for the optimal gain, but stays PSD
    // under rounding.
    const Matrix4 a = Matrix4::Identity() - k * j;
    out.state.E = a * s.E * a.transpose() + noise.range_variance() * k * k.transpose();
    symmetrize(out.state.E);
    return out;
}

EkfState initial_state(const Pose2D& start) {
    EkfState s;
    s.x << start.x, start.y, 0.0, 0.0;
    s.E = Vector4(0.01, 0.01, 0.1, 0.1).asDiagonal();
    return s;
}

EkfRunResult run_ekf(std::span<const IsacMeasurement> isac, std::span<const ImuMeasurement> imu,
                     const SensorGeometry& geom, const EkfNoise& noise, const EkfState& initial,
                     const EkfRunOptions& opts) {
    const auto events = merge_streams(isac, imu);
    EkfRunResult out;
    out.estimates.reserve(events.size());

    EkfState state = initial;
    Eigen::Vector2d held_u = Eigen::Vector2d::Zero();
    double yaw = opts.initial_heading;
    std::optional<double> last_t;
    std::optional<double> last_imu_t;

    for (const auto& ev : events) {
        const double t = ev.t();
        if (last_t && t > *last_t) state = predict(state, held_u, t - *last_t, noise);
        last_t = t;

        if (ev.source() == Source::Imu) {
            const auto& m = ev.imu();
            if (last_imu_t && t > *last_imu_t) yaw += m.gyro.z() * (t - *last_imu_t);
            last_imu_t = t;
            held_u = imu::rotate_to_global(m.accel_body.head<2>(), yaw);
        } else {
            try {
                const double r2 = geometry::project_range(ev.isac().range_3d, geom.delta_h(),
                                                          opts.range_clamp_tolerance).r_2d;
                const auto upd = update_range(state, r2, geom.isac_position, noise);
                if (!upd.applied) ++out.skipped_updates;
                state = upd.state;
            } catch (const ValidationError&) {
                ++out.skipped_updates;
            }
        }
        out.estimates.push_back({t, state.position()});
    }
    out.final_state = state;
    return out;
}

std::string format_estimates(std::span<const TimedPose> estimates) {
    std::string out = "t,px,py\n";
    for (const auto& e : estimates) out += fmt::format("{},{},{}\n", e.t, e.position.x, e.position.y);
    return out;
}

}  // namespace isac::ekf

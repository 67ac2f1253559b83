#include "isacfusion/geometry.hpp"

#include <cmath>

#include <fmt/format.h>

namespace isac::geometry {

ProjectedRange project_range(double r_3d, double delta_h, double clamp_tolerance) {
    const double dh = std::abs(delta_h);
    if (!std::isfinite(r_3d) || r_3d < 0.0) {
        throw ValidationError(fmt::format("invalid slant range {}", r_3d));
    }
    if (r_3d < dh) {
        if (dh - r_3d <= clamp_tolerance) {
            return {0.0, true};
        }
        throw ValidationError(
            fmt::format("slant range {} m is shorter than height difference {} m", r_3d, dh));
    }
    return {std::sqrt((r_3d - dh) * (r_3d + dh)), false};
}

Pose2D geometric_position(double r_2d, const SensorGeometry& geom) {
    return {geom.isac_position.x + r_2d * std::cos(geom.azimuth),
            geom.isac_position.y + r_2d * std::sin(geom.azimuth)};
}

}  // namespace isac::geometry

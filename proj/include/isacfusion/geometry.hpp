#pragma once

#include "isacfusion/core.hpp"

namespace isac::geometry {

/// Horizontal (map-plane) range derived from a slant range.
struct ProjectedRange {
    double r_2d = 0.0;
    bool clamped = false;  ///< r_3d was slightly below |delta_h| and r_2d was forced to 0
};

/// r_2d = sqrt(r_3d^2 - delta_h^2).
///
/// A slant range up to `clamp_tolerance` below |delta_h| is treated as
/// measurement noise near the vertical and yields r_2d = 0 with `clamped`
/// set. Anything shorter than that throws ValidationError.
ProjectedRange project_range(double r_3d, double delta_h, double clamp_tolerance = 0.0);

/// Single-anchor position estimate along the radar boresight:
///   x = p_x + r_2d cos(azimuth),  y = p_y + r_2d sin(azimuth)
Pose2D geometric_position(double r_2d, const SensorGeometry& geom);

}  // namespace isac::geometry

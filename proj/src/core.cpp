#include "isacfusion/core.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace isac {

StreamOrderError::StreamOrderError(std::string stream, std::size_t index)
    : ValidationError(fmt::format("{} stream is not time-ordered at index {}", stream, index)),
      stream_(std::move(stream)),
      index_(index) {}

std::vector<Event> merge_streams(std::span<const IsacMeasurement> isac,
                                 std::span<const ImuMeasurement> imu) {
    check_time_order(isac, "isac");
    check_time_order(imu, "imu");

    std::vector<Event> out;
    out.reserve(isac.size() + imu.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < isac.size() || j < imu.size()) {
        // Ties go to the IMU sample.
        const bool take_imu = j < imu.size() && (i == isac.size() || imu[j].t <= isac[i].t);
        if (take_imu) {
            out.push_back(Event{imu[j++]});
        } else {
            out.push_back(Event{isac[i++]});
        }
    }
    return out;
}

std::optional<Pose2D> interpolate_position(std::span<const GroundTruthSample> truth, double t) {
    if (truth.empty() || t < truth.front().t || t > truth.back().t) return std::nullopt;
    const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                     [](const GroundTruthSample& s, double v) { return s.t < v; });
    if (it->t == t) return it->position;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return Pose2D{lo.position.x + w * (hi.position.x - lo.position.x),
                  lo.position.y + w * (hi.position.y - lo.position.y)};
}

}  // namespace isac

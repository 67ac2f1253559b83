#include "isacfusion/csv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "isacfusion/fileio.hpp"

namespace isac::csv {
namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

constexpr std::string_view kIsacHeader[] = {"t", "range_3d", "doppler_velocity"};
constexpr std::string_view kImuHeader[] = {"t", "ax", "ay", "az", "gx", "gy", "gz"};
constexpr std::string_view kTruthHeader[] = {"t", "px", "py"};

}  // namespace

std::string num(double v) { return fmt::format("{}", v); }

Table parse(std::string_view text, std::span<const std::string_view> expected_header,
            std::string_view source) {
    Table table;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    // Strip a UTF-8 byte order mark if present.
    if (text.starts_with("\xEF\xBB\xBF")) pos = 3;

    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;

        const auto fields = split(line);
        if (!have_header) {
            if (fields.size() != expected_header.size()) {
                throw ValidationError(fmt::format("{}: expected header '{}'", source,
                                                  fmt::join(expected_header, ",")));
            }
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (trim(fields[i]) != expected_header[i]) {
                    throw ValidationError(fmt::format("{}: expected header '{}'", source,
                                                      fmt::join(expected_header, ",")));
                }
                table.header.emplace_back(expected_header[i]);
            }
            have_header = true;
            continue;
        }

        if (fields.size() != expected_header.size()) {
            throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", source, line_no,
                                              expected_header.size(), fields.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto f = trim(fields[i]);
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[i]);
            if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(row[i])) {
                throw ValidationError(
                    fmt::format("{}:{}: bad number '{}' in column {}", source, line_no, f,
                                expected_header[i]));
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) {
        throw ValidationError(fmt::format("{}: missing header row", source));
    }
    return table;
}

std::string format_isac(std::span<const IsacMeasurement> rows) {
    std::string out = "t,range_3d,doppler_velocity\n";
    for (const auto& m : rows) {
        out += fmt::format("{},{},{}\n", m.t, m.range_3d, m.doppler_velocity);
    }
    return out;
}

std::string format_imu(std::span<const ImuMeasurement> rows) {
    std::string out = "t,ax,ay,az,gx,gy,gz\n";
    for (const auto& m : rows) {
        out += fmt::format("{},{},{},{},{},{},{}\n", m.t, m.accel_body.x(), m.accel_body.y(),
                           m.accel_body.z(), m.gyro.x(), m.gyro.y(), m.gyro.z());
    }
    return out;
}

std::string format_truth(std::span<const GroundTruthSample> rows) {
    std::string out = "t,px,py\n";
    for (const auto& s : rows) {
        out += fmt::format("{},{},{}\n", s.t, s.position.x, s.position.y);
    }
    return out;
}

std::vector<IsacMeasurement> parse_isac(std::string_view text, std::string_view source) {
    const auto table = parse(text, kIsacHeader, source);
    std::vector<IsacMeasurement> out;
    out.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        if (r[1] < 0.0) {
            throw ValidationError(fmt::format("{}: negative range_3d at t={}", source, r[0]));
        }
        out.push_back({r[0], r[1], r[2]});
    }
    return out;
}

std::vector<ImuMeasurement> parse_imu(std::string_view text, std::string_view source) {
    const auto table = parse(text, kImuHeader, source);
    std::vector<ImuMeasurement> out;
    out.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        out.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}});
    }
    return out;
}

std::vector<GroundTruthSample> parse_truth(std::string_view text, std::string_view source) {
    const auto table = parse(text, kTruthHeader, source);
    std::vector<GroundTruthSample> out;
    out.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        out.push_back({r[0], {r[1], r[2]}});
    }
    return out;
}

std::vector<IsacMeasurement> read_isac(const std::filesystem::path& path) {
    return parse_isac(read_file(path), path.string());
}
std::vector<ImuMeasurement> read_imu(const std::filesystem::path& path) {
    return parse_imu(read_file(path), path.string());
}
std::vector<GroundTruthSample> read_truth(const std::filesystem::path& path) {
    return parse_truth(read_file(path), path.string());
}

}  // namespace isac::csv

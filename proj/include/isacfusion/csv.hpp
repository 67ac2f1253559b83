#pragma once

// Measurement-log and estimate CSV files.
//
//   isac.csv       t,range_3d,doppler_velocity
//   imu.csv        t,ax,ay,az,gx,gy,gz
//   truth.csv      t,px,py
//   estimates.csv  t,px,py[,stage1_used]
//
// A header row is mandatory. Numbers are written in shortest round-trip form.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "isacfusion/core.hpp"

namespace isac::csv {

/// A parsed CSV table: header names plus rows of doubles.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Parse CSV text. `expected_header` must match the header row exactly.
/// `source` names the input in error messages.
Table parse(std::string_view text, std::span<const std::string_view> expected_header,
            std::string_view source);

std::string format_isac(std::span<const IsacMeasurement> rows);
std::string format_imu(std::span<const ImuMeasurement> rows);
std::string format_truth(std::span<const GroundTruthSample> rows);

std::vector<IsacMeasurement> parse_isac(std::string_view text, std::string_view source = "isac.csv");
std::vector<ImuMeasurement> parse_imu(std::string_view text, std::string_view source = "imu.csv");
std::vector<GroundTruthSample> parse_truth(std::string_view text,
                                           std::string_view source = "truth.csv");

std::vector<IsacMeasurement> read_isac(const std::filesystem::path& path);
std::vector<ImuMeasurement> read_imu(const std::filesystem::path& path);
std::vector<GroundTruthSample> read_truth(const std::filesystem::path& path);

/// Shortest decimal representation that parses back to the same double.
std::string num(double v);

}  // namespace isac::csv

#pragma once

// Positioning-error metrics: truth alignment, empirical CDF, nearest-rank
// percentiles and multi-method summaries.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isacfusion/core.hpp"

namespace isac::eval {

struct ErrorSample {
    double t = 0.0;
    double error = 0.0;  ///< m
};

struct ErrorSeries {
    std::vector<ErrorSample> samples;
    std::size_t dropped = 0;  ///< estimates outside the truth span

    std::vector<double> errors() const;
};

/// Linear truth interpolation at each estimate time; Euclidean error.
/// Throws ValidationError if no estimate falls inside the truth span.
ErrorSeries align_and_error(std::span<const TimedPose> estimates,
                            std::span<const GroundTruthSample> truth);

struct CdfPoint {
    double error = 0.0;
    double fraction = 0.0;
};

/// Step-function CDF: one point per distinct error level with fraction k/n,
/// where k counts samples <= that level. Throws ValidationError when empty.
std::vector<CdfPoint> cdf(const ErrorSeries& series);

/// Nearest-rank percentile: sorted[ceil(q n) - 1]. q must lie in (0, 1].
double percentile(const ErrorSeries& series, double q);
double percentile(std::vector<double> errors, double q);

double average(const ErrorSeries& series);

struct SummaryRow {
    std::string method;
    double average_error = 0.0;  ///< m
    double p90 = 0.0;            ///< m
    std::size_t sample_count = 0;
};

SummaryRow summarize_one(const std::string& method, const ErrorSeries& series);

struct Improvement {
    std::string method;    ///< the better-or-worse method A
    std::string baseline;  ///< method B
    double percent = 0.0;  ///< (avg_B - avg_A) / avg_B * 100
};

struct Summary {
    std::vector<SummaryRow> rows;
    std::vector<Improvement> improvements;  ///< every ordered pair A != B
    std::string report;
};

/// (avg_b - avg_a) / avg_b * 100; 0 when avg_b is 0.
double improvement_percent(double avg_a, double avg_b);

Summary summarize(std::span<const std::pair<std::string, ErrorSeries>> methods);
Summary summarize_rows(std::vector<SummaryRow> rows);

/// `error_m,fraction`
std::string format_cdf(std::span<const CdfPoint> points);
/// `t,error_m`
std::string format_errors(const ErrorSeries& series);
/// `method,average_error_m,p90_m,sample_count`
std::string format_summary(std::span<const SummaryRow> rows);

}  // namespace isac::eval

#include "isacfusion/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isacfusion/error.hpp"

namespace isac::eval {

std::vector<double> ErrorSeries::errors() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.error);
    return out;
}

ErrorSeries align_and_error(std::span<const TimedPose> estimates,
                            std::span<const GroundTruthSample> truth) {
    check_time_order(truth, "truth");
    ErrorSeries out;
    out.samples.reserve(estimates.size());
    for (const auto& e : estimates) {
        const auto p = interpolate_position(truth, e.t);
        if (!p) {
            ++out.dropped;
            continue;
        }
        const double err = (e.position.vec() - p->vec()).norm();
        if (!std::isfinite(err)) {
            throw ValidationError(fmt::format("non-finite estimate at t={}", e.t));
        }
        out.samples.push_back({e.t, err});
    }
    if (out.samples.empty()) {
        throw ValidationError(
            fmt::format("no estimates overlap the truth span ({} dropped)", out.dropped));
    }
    return out;
}

std::vector<CdfPoint> cdf(const ErrorSeries& series) {
    auto e = series.errors();
    if (e.empty()) throw ValidationError("cdf of an empty error series");
    std::sort(e.begin(), e.end());
    const double n = static_cast<double>(e.size());
    std::vector<CdfPoint> out;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (i + 1 < e.size() && e[i + 1] == e[i]) continue;
        out.push_back({e[i], i + 1 == e.size() ? 1.0 : static_cast<double>(i + 1) / n});
    }
    return out;
}

double percentile(std::vector<double> errors, double q) {
    if (errors.empty()) throw ValidationError("percentile of an empty error series");
    if (!(q > 0.0 && q <= 1.0)) {
        throw ValidationError(fmt::format("percentile q must be in (0, 1], got {}", q));
    }
    std::sort(errors.begin(), errors.end());
    const double n = static_cast<double>(errors.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, errors.size());
    return errors[rank - 1];
}

double percentile(const ErrorSeries& series, double q) { return percentile(series.errors(), q); }

double average(const ErrorSeries& series) {
    if (series.samples.empty()) throw ValidationError("average of an empty error series");
    double sum = 0.0;
    for (const auto& s : series.samples) sum += s.error;
    return sum / static_cast<double>(series.samples.size());
}

SummaryRow summarize_one(const std::string& method, const ErrorSeries& series) {
    return {method, average(series), percentile(series, 0.9), series.samples.size()};
}

double improvement_percent(double avg_a, double avg_b) {
    if (avg_b == 0.0) return 0.0;
    return (avg_b - avg_a) / avg_b * 100.0;
}

Summary summarize_rows(std::vector<SummaryRow> rows) {
    if (rows.empty()) throw ValidationError("summary needs at least one method");
    Summary out;
    out.rows = std::move(rows);
    std::string& rep = out.report;
    rep += fmt::format("{:<14} {:>12} {:>12} {:>8}\n", "method", "avg [cm]", "p90 [cm]", "n");
    for (const auto& r : out.rows) {
        rep += fmt::format("{:<14} {:>12.2f} {:>12.2f} {:>8}\n", r.method, r.average_error * 100.0,
                           r.p90 * 100.0, r.sample_count);
    }
    for (const auto& a : out.rows) {
        for (const auto& b : out.rows) {
            if (&a == &b) continue;
            out.improvements.push_back(
                {a.method, b.method, improvement_percent(a.average_error, b.average_error)});
        }
    }
    for (const auto& imp : out.improvements) {
        if (imp.percent <= 0.0) continue;
        rep += fmt::format("{} is {:.1f}% lower than {}\n", imp.method, imp.percent, imp.baseline);
    }
    return out;
}

Summary summarize(std::span<const std::pair<std::string, ErrorSeries>> methods) {
    std::vector<SummaryRow> rows;
    rows.reserve(methods.size());
    for (const auto& [name, series] : methods) rows.push_back(summarize_one(name, series));
    return summarize_rows(std::move(rows));
}

std::string format_cdf(std::span<const CdfPoint> points) {
    std::string out = "error_m,fraction\n";
    for (const auto& p : points) out += fmt::format("{},{}\n", p.error, p.fraction);
    return out;
}

std::string format_errors(const ErrorSeries& series) {
    std::string out = "t,error_m\n";
    for (const auto& s : series.samples) out += fmt::format("{},{}\n", s.t, s.error);
    return out;
}

std::string format_summary(std::span<const SummaryRow> rows) {
    std::string out = "method,average_error_m,p90_m,sample_count\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{}\n", r.method, r.average_error, r.p90, r.sample_count);
    }
    return out;
}

}  // namespace isac::eval

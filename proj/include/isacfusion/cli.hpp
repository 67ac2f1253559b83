#pragma once

// `isacfuse` command-line front end: simulate, train, evaluate, compare.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace isac::cli {

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "ISACFUSE_OUT";

struct SimulateOptions {
    std::filesystem::path config;      ///< empty = calibrated benchmark scenario
    std::filesystem::path trajectory;  ///< empty = benchmark loop
    std::optional<std::uint64_t> seed;
    std::filesystem::path out;
};

struct TrainOptions {
    std::filesystem::path data;  ///< directory written by `simulate`
    std::filesystem::path train_config;
    std::filesystem::path config;  ///< overrides the scenario stored with the data
    std::filesystem::path model;   ///< model file to write; also <stem>_loss.csv and <stem>_ekf.json
};

struct EvaluateOptions {
    std::filesystem::path data;
    std::filesystem::path model;
    std::string method;
    std::filesystem::path config;
    std::filesystem::path ekf;  ///< EKF noise parameters; empty = defaults
    std::filesystem::path out;
};

struct CompareOptions {
    std::filesystem::path manifest;
    std::filesystem::path out;  ///< overrides the manifest's output directory
    bool assert_ordering = false;
};

/// Each command returns a process exit code and reports to `log`.
int cmd_simulate(const SimulateOptions& opts, std::ostream& log);
int cmd_train(const TrainOptions& opts, std::ostream& log);
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& log);
int cmd_compare(const CompareOptions& opts, std::ostream& log);

/// Output root from ISACFUSE_OUT, or "runs".
std::filesystem::path default_output_root();

/// Parses argv and dispatches. Library errors become exit code 2 with the
/// message on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace isac::cli

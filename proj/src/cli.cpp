#include "isacfusion/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <ostream>

#include "isacfusion/csv.hpp"
#include "isacfusion/error.hpp"
#include "isacfusion/experiment.hpp"
#include "isacfusion/fileio.hpp"
#include "isacfusion/sim.hpp"

namespace isac::cli {
namespace {

namespace fs = std::filesystem;
using experiment::Method;

constexpr const char* kScenarioFile = "scenario.json";

sim::ScenarioConfig scenario_or_default(const fs::path& path) {
    return path.empty() ? experiment::benchmark_scenario() : sim::load_scenario_config(path);
}

/// Scenario for a measurement directory: explicit file, else the copy stored
/// by `simulate`, else the benchmark defaults.
sim::ScenarioConfig scenario_for_data(const fs::path& explicit_path, const fs::path& data) {
    if (!explicit_path.empty()) return sim::load_scenario_config(explicit_path);
    if (fs::exists(data / kScenarioFile)) return sim::load_scenario_config(data / kScenarioFile);
    return experiment::benchmark_scenario();
}

fs::path out_or_default(const fs::path& out, const std::string& name) {
    return out.empty() ? default_output_root() / name : out;
}

std::string loss_history_csv(const fusion::FusionTraining& t) {
    std::string out = "stage,epoch,train_loss,validation_loss\n";
    auto add = [&](int stage, const nn::TrainResult& r) {
        for (const auto& e : r.history) {
            out += fmt::format("{},{},{},{}\n", stage, e.epoch, e.train_loss, e.validation_loss);
        }
    };
    add(1, t.stage1);
    add(2, t.stage2);
    return out;
}

}  // namespace

fs::path default_output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& log) {
    auto cfg = scenario_or_default(opts.config);
    if (opts.seed) cfg.rng_seed = *opts.seed;
    const auto spec =
        opts.trajectory.empty() ? sim::benchmark_trajectory() : sim::load_trajectory(opts.trajectory);
    const auto run = sim::run_scenario(spec, cfg);
    const fs::path out = out_or_default(opts.out, "simulate");
    sim::write_run(run, out);
    write_file_atomic(out / kScenarioFile, sim::scenario_config_to_json(cfg));
    fmt::print(log, "simulate: {} isac, {} imu, {} truth samples, {} dropped frames -> {}\n",
               run.isac.size(), run.imu.size(), run.truth.size(), run.report.dropped.size(),
               out.string());
    return 0;
}

int cmd_train(const TrainOptions& opts, std::ostream& log) {
    if (opts.data.empty()) throw ValidationError("train: --data is required");
    const auto cfg = scenario_for_data(opts.config, opts.data);
    const experiment::TrainSettings settings =
        opts.train_config.empty() ? experiment::benchmark_train_settings()
                                  : experiment::load_train_settings(opts.train_config);

    sim::ScenarioRun run;
    run.isac = csv::read_isac(opts.data / "isac.csv");
    run.imu = csv::read_imu(opts.data / "imu.csv");
    run.truth = csv::read_truth(opts.data / "truth.csv");
    const auto report = sim::RunReport::from_json(read_file(opts.data / "report.json"));
    run.initial_pose = report.initial_pose;
    run.initial_heading = report.initial_heading;

    const auto trained = experiment::train_on_run(run, cfg, settings);
    const fs::path model_path = opts.model.empty() ? default_output_root() / "model.json" : opts.model;
    fusion::save_fusion_model(trained.model, model_path);
    const fs::path stem = model_path.parent_path() / model_path.stem();
    write_file_atomic(stem.string() + "_loss.csv", loss_history_csv(trained));
    const auto ekf = experiment::tune_ekf(run, cfg.geometry, settings.dataset.range_clamp_tolerance);
    write_file_atomic(stem.string() + "_ekf.json", experiment::ekf_params_to_json(ekf));
    fmt::print(log,
               "train: stage 1 best epoch {} (val mse {:.3e}), stage 2 best epoch {} (val mse "
               "{:.3e}) -> {}\n",
               trained.stage1.best_epoch, trained.stage1.best_validation_loss,
               trained.stage2.best_epoch, trained.stage2.best_validation_loss, model_path.string());
    return 0;
}

int cmd_evaluate(const EvaluateOptions& opts, std::ostream& log) {
    if (opts.data.empty()) throw ValidationError("evaluate: --data is required");
    const Method method = experiment::parse_method(opts.method);
    if (experiment::needs_model(method) && opts.model.empty()) {
        throw ValidationError(fmt::format("evaluate: method {} requires --model", opts.method));
    }
    const auto cfg = scenario_for_data(opts.config, opts.data);
    std::optional<fusion::FusionModel> model;
    if (!opts.model.empty()) model = fusion::load_fusion_model(opts.model);

    const auto isac = csv::read_isac(opts.data / "isac.csv");
    const auto imu = csv::read_imu(opts.data / "imu.csv");
    const auto report = sim::RunReport::from_json(read_file(opts.data / "report.json"));
    const auto ekf =
        opts.ekf.empty() ? experiment::EkfParams{} : experiment::load_ekf_params(opts.ekf);
    const auto est = experiment::estimate(method, isac, imu, report.initial_pose,
                                          report.initial_heading, cfg.geometry,
                                          model ? &*model : nullptr, ekf);

    const fs::path out = out_or_default(opts.out, "evaluate");
    fs::create_directories(out);
    write_file_atomic(out / "estimates.csv", ekf::format_estimates(est));
    fmt::print(log, "evaluate: {} estimates", est.size());
    if (fs::exists(opts.data / "truth.csv")) {
        const auto truth = csv::read_truth(opts.data / "truth.csv");
        const auto series = eval::align_and_error(est, truth);
        write_file_atomic(out / "errors.csv", eval::format_errors(series));
        const auto points = eval::cdf(series);
        write_file_atomic(out / "cdf.csv", eval::format_cdf(points));
        const auto row = eval::summarize_one(opts.method, series);
        fmt::print(log, ", average error {:.2f} cm, p90 {:.2f} cm", row.average_error * 100.0,
                   row.p90 * 100.0);
    }
    fmt::print(log, " -> {}\n", out.string());
    return 0;
}

int cmd_compare(const CompareOptions& opts, std::ostream& log) {
    if (opts.manifest.empty()) throw ValidationError("compare: a manifest is required");
    const auto manifest = experiment::load_manifest(opts.manifest);
    const auto cfg = scenario_or_default(manifest.scenario);
    const auto spec = manifest.trajectory.empty() ? sim::benchmark_trajectory()
                                                  : sim::load_trajectory(manifest.trajectory);
    const experiment::TrainSettings settings =
        manifest.train_config.empty() ? experiment::benchmark_train_settings()
                                      : experiment::load_train_settings(manifest.train_config);
    fs::path out = opts.out;
    if (out.empty()) out = manifest.output;
    if (out.empty()) out = default_output_root() / "compare";
    fs::create_directories(out);

    std::vector<experiment::SeedResult> results;
    for (auto seed : manifest.seeds) {
        results.push_back(experiment::run_seed(cfg, spec, manifest.train_laps, settings,
                                               manifest.methods, manifest.ekf, seed));
        fmt::print(log, "compare: seed {} done\n", seed);
    }
    const auto agg = experiment::aggregate(results, manifest.methods);

    std::vector<eval::SummaryRow> rows = agg.per_seed_rows;
    rows.insert(rows.end(), agg.mean.rows.begin(), agg.mean.rows.end());
    write_file_atomic(out / "summary.csv", eval::format_summary(rows));
    for (Method m : manifest.methods) {
        eval::ErrorSeries pooled;
        for (const auto& r : results) {
            const auto& s = r.errors.at(m).samples;
            pooled.samples.insert(pooled.samples.end(), s.begin(), s.end());
        }
        const auto points = eval::cdf(pooled);
        write_file_atomic(out / fmt::format("cdf_{}.csv", experiment::method_name(m)),
                          eval::format_cdf(points));
    }
    const std::string report =
        fmt::format("mean over {} seed(s)\n{}", results.size(), agg.mean.report);
    write_file_atomic(out / "report.txt", report);
    log << report;

    if (opts.assert_ordering) {
        const eval::SummaryRow* fusion = nullptr;
        const eval::SummaryRow* isac_only = nullptr;
        for (const auto& r : agg.mean.rows) {
            if (r.method == "dnn-fusion") fusion = &r;
            if (r.method == "dnn-isac") isac_only = &r;
        }
        if (fusion == nullptr || isac_only == nullptr) {
            throw ValidationError("--assert-ordering needs both dnn-fusion and dnn-isac in the manifest");
        }
        if (fusion->average_error >= isac_only->average_error) {
            fmt::print(log, "ordering violated: dnn-fusion {:.4f} m >= dnn-isac {:.4f} m\n",
                       fusion->average_error, isac_only->average_error);
            return 1;
        }
    }
    return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ISAC/IMU fusion positioning toolkit"};
    app.require_subcommand(1);

    SimulateOptions sim_opts;
    std::uint64_t seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate measurement streams for a scenario");
    sim_cmd->add_option("--config", sim_opts.config, "Scenario config (JSON)");
    sim_cmd->add_option("--trajectory", sim_opts.trajectory, "Trajectory spec (JSON)");
    auto* seed_opt = sim_cmd->add_option("--seed", seed, "RNG seed");
    sim_cmd->add_option("--out", sim_opts.out, "Output directory");

    TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train the two-stage fusion model");
    train_cmd->add_option("--data", train_opts.data, "Measurement directory")->required();
    train_cmd->add_option("--train-config", train_opts.train_config, "Training config (JSON)");
    train_cmd->add_option("--config", train_opts.config, "Scenario config (JSON)");
    train_cmd->add_option("--model", train_opts.model, "Model file to write");

    EvaluateOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "Run one positioning method on measurements");
    eval_cmd->add_option("--data", eval_opts.data, "Measurement directory")->required();
    eval_cmd->add_option("--method", eval_opts.method,
                         "dnn-fusion, dnn-isac, ekf-fusion or geometric")
        ->required();
    eval_cmd->add_option("--model", eval_opts.model, "Trained model file");
    eval_cmd->add_option("--config", eval_opts.config, "Scenario config (JSON)");
    eval_cmd->add_option("--ekf", eval_opts.ekf, "EKF noise parameters (JSON, written by train)");
    eval_cmd->add_option("--out", eval_opts.out, "Output directory");

    CompareOptions cmp_opts;
    auto* cmp_cmd = app.add_subcommand("compare", "Benchmark methods over the seeds of a manifest");
    cmp_cmd->add_option("manifest", cmp_opts.manifest, "Experiment manifest (JSON)")->required();
    cmp_cmd->add_option("--out", cmp_opts.out, "Output directory");
    cmp_cmd->add_flag("--assert-ordering", cmp_opts.assert_ordering,
                      "Exit 1 unless dnn-fusion beats dnn-isac on average");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*sim_cmd) {
            if (*seed_opt) sim_opts.seed = seed;
            return cmd_simulate(sim_opts, out);
        }
        if (*train_cmd) return cmd_train(train_opts, out);
        if (*eval_cmd) return cmd_evaluate(eval_opts, out);
        return cmd_compare(cmp_opts, out);
    } catch (const Error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 2;
    }
}

}  // namespace isac::cli

#include "isacfusion/experiment.hpp"

#include <fmt/format.h>
#include <limits>
#include <nlohmann/json.hpp>

#include "isacfusion/fileio.hpp"
#include "isacfusion/geometry.hpp"
#include "isacfusion/rng.hpp"
#include "json_util.hpp"

namespace isac::experiment {
namespace {

using nlohmann::json;
using detail::read;
using detail::reject_unknown;

constexpr std::uint64_t kTrainingRunStream = 31;

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::DnnFusion: return "dnn-fusion";
        case Method::DnnIsac: return "dnn-isac";
        case Method::EkfFusion: return "ekf-fusion";
        case Method::Geometric: return "geometric";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (Method m : kAllMethods) {
        if (method_name(m) == name) return m;
    }
    throw ValidationError(fmt::format(
        "unknown method '{}' (expected dnn-fusion, dnn-isac, ekf-fusion or geometric)", name));
}

bool needs_model(Method m) { return m == Method::DnnFusion || m == Method::DnnIsac; }

TrainSettings parse_train_settings(const std::string& json_text) {
    TrainSettings s;
    try {
        const auto j = json::parse(json_text);
        reject_unknown(j,
                       {"batch_size", "max_epochs", "patience", "validation_fraction", "rng_seed",
                        "learning_rate", "beta1", "beta2", "epsilon", "inject_prev_noise",
                        "stage1_prev_noise_std", "stage2_prev_noise_std", "noise_copies", "noise_ladder",
                        "noise_seed",
                        "range_clamp_tolerance"},
                       "train config");
        read(j, "batch_size", s.nn.batch_size);
        read(j, "max_epochs", s.nn.max_epochs);
        read(j, "patience", s.nn.patience);
        read(j, "validation_fraction", s.nn.validation_fraction);
        read(j, "rng_seed", s.nn.rng_seed);
        read(j, "learning_rate", s.nn.adam.learning_rate);
        read(j, "beta1", s.nn.adam.beta1);
        read(j, "beta2", s.nn.adam.beta2);
        read(j, "epsilon", s.nn.adam.epsilon);
        read(j, "inject_prev_noise", s.dataset.inject_prev_noise);
        read(j, "stage1_prev_noise_std", s.dataset.stage1_prev_noise_std);
        read(j, "stage2_prev_noise_std", s.dataset.stage2_prev_noise_std);
        read(j, "noise_copies", s.dataset.noise_copies);
        read(j, "noise_ladder", s.dataset.noise_ladder);
        read(j, "noise_seed", s.dataset.noise_seed);
        read(j, "range_clamp_tolerance", s.dataset.range_clamp_tolerance);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("train config: {}", e.what()));
    }
    s.nn.validate();
    if (s.dataset.stage1_prev_noise_std < 0.0 || s.dataset.stage2_prev_noise_std < 0.0) {
        throw ValidationError("train config: noise stds must be >= 0");
    }
    if (s.dataset.noise_copies < 1) throw ValidationError("train config: noise_copies must be >= 1");
    if (s.dataset.range_clamp_tolerance < 0.0) {
        throw ValidationError("train config: range_clamp_tolerance must be >= 0");
    }
    return s;
}

TrainSettings load_train_settings(const std::filesystem::path& path) {
    try {
        return parse_train_settings(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string train_settings_to_json(const TrainSettings& s) {
    nlohmann::ordered_json j;
    j["batch_size"] = s.nn.batch_size;
    j["max_epochs"] = s.nn.max_epochs;
    j["patience"] = s.nn.patience;
    j["validation_fraction"] = s.nn.validation_fraction;
    j["rng_seed"] = s.nn.rng_seed;
    j["learning_rate"] = s.nn.adam.learning_rate;
    j["beta1"] = s.nn.adam.beta1;
    j["beta2"] = s.nn.adam.beta2;
    j["epsilon"] = s.nn.adam.epsilon;
    j["inject_prev_noise"] = s.dataset.inject_prev_noise;
    j["stage1_prev_noise_std"] = s.dataset.stage1_prev_noise_std;
    j["stage2_prev_noise_std"] = s.dataset.stage2_prev_noise_std;
    j["noise_copies"] = s.dataset.noise_copies;
    j["noise_ladder"] = s.dataset.noise_ladder;
    j["noise_seed"] = s.dataset.noise_seed;
    j["range_clamp_tolerance"] = s.dataset.range_clamp_tolerance;
    return j.dump(2) + "\n";
}

EkfParams parse_ekf_params(const std::string& json_text) {
    EkfParams p;
    try {
        const auto j = json::parse(json_text);
        reject_unknown(j, {"accel_std", "range_std"}, "ekf");
        read(j, "accel_std", p.accel_std);
        read(j, "range_std", p.range_std);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("ekf: {}", e.what()));
    }
    if (!(p.accel_std >= 0.0) || !(p.range_std > 0.0)) {
        throw ValidationError("ekf: accel_std must be >= 0 and range_std > 0");
    }
    return p;
}

EkfParams load_ekf_params(const std::filesystem::path& path) {
    try {
        return parse_ekf_params(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string ekf_params_to_json(const EkfParams& p) {
    nlohmann::ordered_json j;
    j["accel_std"] = p.accel_std;
    j["range_std"] = p.range_std;
    return j.dump(2) + "\n";
}

EkfParams tune_ekf(const sim::ScenarioRun& run, const SensorGeometry& geom,
                   double range_clamp_tolerance) {
    constexpr double kAccel[] = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    constexpr double kRange[] = {0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
    EkfParams best;
    double best_err = std::numeric_limits<double>::infinity();
    ekf::EkfRunOptions opts;
    opts.initial_heading = run.initial_heading;
    opts.range_clamp_tolerance = range_clamp_tolerance;
    for (double a : kAccel) {
        for (double r : kRange) {
            const auto noise = ekf::EkfNoise::acceleration_driven(a, r * r);
            const auto res = ekf::run_ekf(run.isac, run.imu, geom, noise,
                                          ekf::initial_state(run.initial_pose), opts);
            const double err = eval::average(eval::align_and_error(res.estimates, run.truth));
            if (err < best_err) {
                best_err = err;
                best = {a, r};
            }
        }
    }
    return best;
}

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
    Manifest m;
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    try {
        const auto j = json::parse(json_text);
        reject_unknown(j,
                       {"scenario", "trajectory", "train_config", "seeds", "methods", "output",
                        "train_laps", "ekf"},
                       "manifest");
        if (j.contains("scenario")) m.scenario = resolve(j["scenario"].get<std::string>());
        if (j.contains("trajectory")) m.trajectory = resolve(j["trajectory"].get<std::string>());
        if (j.contains("train_config")) m.train_config = resolve(j["train_config"].get<std::string>());
        if (j.contains("output")) m.output = resolve(j["output"].get<std::string>());
        m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        for (const auto& name : j.at("methods").get<std::vector<std::string>>()) {
            m.methods.push_back(parse_method(name));
        }
        read(j, "train_laps", m.train_laps);
        if (j.contains("ekf")) m.ekf = parse_ekf_params(j["ekf"].dump());
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("manifest: {}", e.what()));
    }
    if (m.seeds.empty()) throw ValidationError("manifest: at least one seed is required");
    if (m.methods.empty()) throw ValidationError("manifest: at least one method is required");
    if (m.train_laps < 1) throw ValidationError("manifest: train_laps must be >= 1");
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    try {
        return parse_manifest(read_file(path), path.parent_path());
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

sim::ScenarioConfig benchmark_scenario() {
    sim::ScenarioConfig cfg;
    cfg.noise.accel_noise_std = 0.02;
    cfg.noise.gyro_noise_std = 0.002;
    cfg.noise.accel_bias = 0.0;
    cfg.noise.csi_noise_std = 55.0;
    cfg.noise.clutter_amplitude = 2.0;
    return cfg;
}

TrainSettings benchmark_train_settings() {
    TrainSettings s;
    s.nn.max_epochs = 1000;
    s.nn.patience = 30;
    s.dataset.inject_prev_noise = true;
    s.dataset.stage1_prev_noise_std = 0.6;
    s.dataset.stage2_prev_noise_std = 0.2;
    s.dataset.noise_copies = 5;
    s.dataset.noise_ladder = true;
    return s;
}

std::uint64_t training_seed(std::uint64_t seed) { return derive_seed(seed, kTrainingRunStream); }

fusion::FusionTraining train_on_run(const sim::ScenarioRun& run, const sim::ScenarioConfig& cfg,
                                    const TrainSettings& settings) {
    fusion::DatasetOptions opts = settings.dataset;
    opts.initial_heading = run.initial_heading;
    const auto sets = fusion::build_training_set(run.isac, run.imu, run.truth, cfg.geometry, opts);
    fusion::ModelContext ctx{run.initial_pose, run.initial_heading, 0.0, cfg.geometry, opts};
    return fusion::train_fusion(sets, settings.nn, ctx);
}

fusion::FusionModel anchored(const fusion::FusionModel& model, const Pose2D& initial_pose,
                             double initial_heading) {
    fusion::FusionModel m = model;
    m.initial_pose = initial_pose;
    m.initial_heading = initial_heading;
    m.dataset_options.initial_heading = initial_heading;
    return m;
}

std::vector<TimedPose> estimate(Method method, std::span<const IsacMeasurement> isac,
                                std::span<const ImuMeasurement> imu, const Pose2D& initial_pose,
                                double initial_heading, const SensorGeometry& geom,
                                const fusion::FusionModel* model, const EkfParams& ekf) {
    if (needs_model(method) && model == nullptr) {
        throw ValidationError(fmt::format("method {} requires a trained model", method_name(method)));
    }
    switch (method) {
        case Method::DnnFusion: {
            const auto m = anchored(*model, initial_pose, initial_heading);
            const auto events = merge_streams(isac, imu);
            return fusion::as_timed_poses(fusion::infer(m, events));
        }
        case Method::DnnIsac: {
            const auto m = anchored(*model, initial_pose, initial_heading);
            return fusion::as_timed_poses(fusion::infer_isac_only(m, isac));
        }
        case Method::EkfFusion: {
            const auto noise =
                ekf::EkfNoise::acceleration_driven(ekf.accel_std, ekf.range_std * ekf.range_std);
            ekf::EkfRunOptions opts;
            opts.initial_heading = initial_heading;
            if (model != nullptr) opts.range_clamp_tolerance = model->range_clamp_tolerance;
            return ekf::run_ekf(isac, imu, geom, noise, ekf::initial_state(initial_pose), opts)
                .estimates;
        }
        case Method::Geometric: {
            std::vector<TimedPose> out;
            out.reserve(isac.size());
            const double tol = fusion::DatasetOptions{}.range_clamp_tolerance;
            for (const auto& m : isac) {
                try {
                    const double r2 = geometry::project_range(m.range_3d, geom.delta_h(), tol).r_2d;
                    out.push_back({m.t, geometry::geometric_position(r2, geom)});
                } catch (const ValidationError&) {
                }
            }
            return out;
        }
    }
    return {};
}

SeedResult run_seed(const sim::ScenarioConfig& cfg, const sim::TrajectorySpec& test_spec,
                    int train_laps, const TrainSettings& settings, std::span<const Method> methods,
                    const std::optional<EkfParams>& ekf, std::uint64_t seed) {
    SeedResult out;
    out.seed = seed;

    bool want_model = false;
    bool want_ekf = false;
    for (Method m : methods) {
        want_model = want_model || needs_model(m);
        want_ekf = want_ekf || m == Method::EkfFusion;
    }
    out.ekf = ekf.value_or(EkfParams{});
    if (want_model || (want_ekf && !ekf)) {
        sim::ScenarioConfig train_cfg = cfg;
        train_cfg.rng_seed = training_seed(seed);
        sim::TrajectorySpec train_spec = test_spec;
        train_spec.laps = train_laps;
        const auto train_run = sim::run_scenario(train_spec, train_cfg);
        if (want_model) out.training = train_on_run(train_run, train_cfg, settings);
        if (want_ekf && !ekf) {
            out.ekf = tune_ekf(train_run, cfg.geometry, settings.dataset.range_clamp_tolerance);
        }
    }

    sim::ScenarioConfig test_cfg = cfg;
    test_cfg.rng_seed = seed;
    const auto test = sim::run_scenario(test_spec, test_cfg);
    for (Method m : methods) {
        const auto est = estimate(m, test.isac, test.imu, test.initial_pose, test.initial_heading,
                                  cfg.geometry, want_model ? &out.training.model : nullptr, out.ekf);
        out.errors[m] = eval::align_and_error(est, test.truth);
    }
    return out;
}

Aggregate aggregate(std::span<const SeedResult> results, std::span<const Method> methods) {
    if (results.empty()) throw ValidationError("aggregate: no seed results");
    Aggregate out;
    std::vector<eval::SummaryRow> mean_rows;
    for (Method m : methods) {
        eval::SummaryRow mean{method_name(m), 0.0, 0.0, 0};
        for (const auto& r : results) {
            const auto row = eval::summarize_one(fmt::format("{}@{}", method_name(m), r.seed),
                                                 r.errors.at(m));
            out.per_seed_rows.push_back(row);
            mean.average_error += row.average_error;
            mean.p90 += row.p90;
            mean.sample_count += row.sample_count;
        }
        mean.average_error /= static_cast<double>(results.size());
        mean.p90 /= static_cast<double>(results.size());
        mean_rows.push_back(mean);
    }
    out.mean = eval::summarize_rows(std::move(mean_rows));
    return out;
}

}  // namespace isac::experiment

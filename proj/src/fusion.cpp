#include "isacfusion/fusion.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "isacfusion/fileio.hpp"
#include "isacfusion/geometry.hpp"
#include "isacfusion/imu.hpp"
#include "isacfusion/rng.hpp"

namespace isac::fusion {
namespace {

constexpr const char* kSchema = "isacfusion.fusion";
constexpr int kSchemaVersion = 1;

enum SeedStream : std::uint64_t { kStage1Noise = 21, kStage2Noise = 22, kStage1Train = 23, kStage2Train = 24 };

nn::Dataset to_dataset(const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::Vector2d>& y,
                       int in_dims) {
    nn::Dataset d{Eigen::MatrixXd(in_dims, static_cast<Eigen::Index>(x.size())),
                  Eigen::MatrixXd(2, static_cast<Eigen::Index>(y.size()))};
    for (std::size_t i = 0; i < x.size(); ++i) {
        d.inputs.col(static_cast<Eigen::Index>(i)) = x[i];
        d.targets.col(static_cast<Eigen::Index>(i)) = y[i];
    }
    return d;
}

std::optional<double> horizontal_range(const IsacMeasurement& m, const SensorGeometry& geom,
                                       double clamp_tolerance) {
    try {
        return geometry::project_range(m.range_3d, geom.delta_h(), clamp_tolerance).r_2d;
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

Pose2D predict_pose(const nn::Model& model, const Eigen::VectorXd& features) {
    const Eigen::VectorXd out = model.predict(features);
    return {out(0), out(1)};
}

nlohmann::ordered_json geometry_json(const SensorGeometry& g) {
    return {{"isac_position", {g.isac_position.x, g.isac_position.y}},
            {"isac_height", g.isac_height},
            {"target_height", g.target_height},
            {"azimuth", g.azimuth},
            {"elevation", g.elevation}};
}

SensorGeometry geometry_from(const nlohmann::json& j) {
    SensorGeometry g;
    g.isac_position = {j.at("isac_position").at(0).get<double>(),
                       j.at("isac_position").at(1).get<double>()};
    g.isac_height = j.at("isac_height").get<double>();
    g.target_height = j.at("target_height").get<double>();
    g.azimuth = j.at("azimuth").get<double>();
    g.elevation = j.at("elevation").get<double>();
    return g;
}

}  // namespace

TrainingSets build_training_set(std::span<const IsacMeasurement> isac,
                                std::span<const ImuMeasurement> imu,
                                std::span<const GroundTruthSample> truth,
                                const SensorGeometry& geom, const DatasetOptions& opts) {
    check_time_order(isac, "isac");
    check_time_order(imu, "imu");
    check_time_order(truth, "truth");
    if (truth.empty()) throw ValidationError("build_training_set: empty truth stream");

    boost::random::normal_distribution<double> n01(0.0, 1.0);
    auto jitter = [&](Rng& rng, double std) {
        if (!opts.inject_prev_noise || std <= 0.0) return Eigen::Vector2d::Zero().eval();
        const double dx = std * n01(rng);
        const double dy = std * n01(rng);
        return Eigen::Vector2d(dx, dy);
    };

    auto ladder = [&](double std, int copy) { return opts.noise_ladder ? std::ldexp(std, -copy) : std; };

    if (opts.noise_copies < 1) throw ValidationError("build_training_set: noise_copies must be >= 1");
    const int copies = opts.inject_prev_noise ? opts.noise_copies : 1;

    std::vector<Eigen::VectorXd> x1;
    std::vector<Eigen::Vector2d> y1;
    Rng rng1(derive_seed(opts.noise_seed, kStage1Noise));
    for (std::size_t i = 1; i < isac.size(); ++i) {
        const auto prev = interpolate_position(truth, isac[i - 1].t);
        const auto now = interpolate_position(truth, isac[i].t);
        const auto r2 = horizontal_range(isac[i], geom, opts.range_clamp_tolerance);
        if (!prev || !now || !r2) continue;
        for (int c = 0; c < copies; ++c) {
            const Eigen::Vector2d p = prev->vec() + jitter(rng1, ladder(opts.stage1_prev_noise_std, c));
            x1.push_back(Stage1Input{Pose2D::from(p), *r2, isac[i].doppler_velocity}.features());
            y1.push_back(now->vec());
        }
    }

    std::vector<Eigen::VectorXd> x2;
    std::vector<Eigen::Vector2d> y2;
    Rng rng2(derive_seed(opts.noise_seed, kStage2Noise));
    imu::DistanceTracker tracker(opts.initial_heading);
    for (std::size_t k = 0; k < imu.size(); ++k) {
        if (k > 0 && imu[k].t == imu[k - 1].t) continue;
        const auto inc = tracker.push(imu[k]);
        if (k == 0) continue;
        const auto prev = interpolate_position(truth, imu[k - 1].t);
        const auto now = interpolate_position(truth, imu[k].t);
        if (!prev || !now) continue;
        for (int c = 0; c < copies; ++c) {
            const Eigen::Vector2d p = prev->vec() + jitter(rng2, ladder(opts.stage2_prev_noise_std, c));
            x2.push_back(Stage2Input{Pose2D::from(p), inc.d_imu}.features());
            y2.push_back(now->vec());
        }
    }

    if (x1.empty() && x2.empty()) {
        throw ValidationError("build_training_set: measurement streams do not overlap the truth span");
    }
    return {to_dataset(x1, y1, 4), to_dataset(x2, y2, 3)};
}

FusionTraining train_fusion(const TrainingSets& sets, const nn::TrainConfig& cfg,
                            const ModelContext& ctx) {
    if (sets.stage1.size() == 0) throw ValidationError("train_fusion: empty stage-1 dataset");
    if (sets.stage2.size() == 0) throw ValidationError("train_fusion: empty stage-2 dataset");

    nn::TrainConfig c1 = cfg;
    c1.rng_seed = derive_seed(cfg.rng_seed, kStage1Train);
    nn::TrainConfig c2 = cfg;
    c2.rng_seed = derive_seed(cfg.rng_seed, kStage2Train);

    FusionTraining out;
    out.stage1 = nn::train(kStage1Layers, sets.stage1, c1);
    out.stage2 = nn::train(kStage2Layers, sets.stage2, c2);
    out.model.stage1 = out.stage1.model;
    out.model.stage2 = out.stage2.model;
    out.model.initial_pose = ctx.initial_pose;
    out.model.initial_heading = ctx.initial_heading;
    out.model.time_origin = ctx.time_origin;
    out.model.geometry = ctx.geometry;
    out.model.range_clamp_tolerance = ctx.dataset_options.range_clamp_tolerance;
    out.model.dataset_options = ctx.dataset_options;
    return out;
}

std::vector<FusionEstimate> infer(const FusionModel& model, std::span<const Event> events) {
    std::vector<FusionEstimate> out;
    Pose2D prev_final = model.initial_pose;
    Pose2D fresh_initial;
    bool fresh = false;
    imu::DistanceTracker tracker(model.initial_heading);
    double last_t = model.time_origin;

    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        const double t = ev.t();
        if (t < model.time_origin) {
            throw ValidationError(fmt::format("event {} at t={} precedes the model time origin {}",
                                              i, t, model.time_origin));
        }
        if (t < last_t) throw StreamOrderError("events", i);
        last_t = t;

        if (ev.source() == Source::Isac) {
            const auto& m = ev.isac();
            const auto r2 = horizontal_range(m, model.geometry, model.range_clamp_tolerance);
            if (!r2) continue;
            fresh_initial = predict_pose(model.stage1,
                                         Stage1Input{prev_final, *r2, m.doppler_velocity}.features());
            fresh = true;
            continue;
        }

        const auto& m = ev.imu();
        double d_imu = 0.0;
        const auto& st = tracker.state();
        if (!st || m.t > st->last_t) d_imu = tracker.push(m).d_imu;
        const bool used = fresh;
        const Pose2D input = used ? fresh_initial : prev_final;
        fresh = false;
        prev_final = predict_pose(model.stage2, Stage2Input{input, d_imu}.features());
        out.push_back({t, prev_final, used});
    }
    return out;
}

std::vector<FusionEstimate> infer_isac_only(const FusionModel& model,
                                            std::span<const IsacMeasurement> isac) {
    check_time_order(isac, "isac");
    std::vector<FusionEstimate> out;
    out.reserve(isac.size());
    Pose2D prev = model.initial_pose;
    for (std::size_t i = 0; i < isac.size(); ++i) {
        const auto& m = isac[i];
        if (m.t < model.time_origin) {
            throw ValidationError(fmt::format("isac sample {} at t={} precedes the model time origin",
                                              i, m.t));
        }
        const auto r2 = horizontal_range(m, model.geometry, model.range_clamp_tolerance);
        if (!r2) continue;
        prev = predict_pose(model.stage1, Stage1Input{prev, *r2, m.doppler_velocity}.features());
        out.push_back({m.t, prev, true});
    }
    return out;
}

std::string fusion_model_to_json(const FusionModel& model) {
    nlohmann::ordered_json j;
    j["schema"] = kSchema;
    j["version"] = kSchemaVersion;
    j["initial_pose"] = {model.initial_pose.x, model.initial_pose.y};
    j["initial_heading"] = model.initial_heading;
    j["time_origin"] = model.time_origin;
    j["geometry"] = geometry_json(model.geometry);
    j["range_clamp_tolerance"] = model.range_clamp_tolerance;
    const auto& o = model.dataset_options;
    j["training"] = {{"inject_prev_noise", o.inject_prev_noise},
                     {"stage1_prev_noise_std", o.stage1_prev_noise_std},
                     {"stage2_prev_noise_std", o.stage2_prev_noise_std},
                     {"noise_copies", o.noise_copies},
                     {"noise_ladder", o.noise_ladder},
                     {"noise_seed", o.noise_seed}};
    j["stage1"] = nlohmann::ordered_json::parse(nn::model_to_json(model.stage1));
    j["stage2"] = nlohmann::ordered_json::parse(nn::model_to_json(model.stage2));
    return j.dump(1) + "\n";
}

FusionModel fusion_model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema").get<std::string>() != kSchema) {
            throw ValidationError("fusion model: unexpected schema");
        }
        if (j.at("version").get<int>() != kSchemaVersion) {
            throw ValidationError("fusion model: unsupported version");
        }
        FusionModel m;
        m.initial_pose = {j.at("initial_pose").at(0).get<double>(),
                          j.at("initial_pose").at(1).get<double>()};
        m.initial_heading = j.at("initial_heading").get<double>();
        m.time_origin = j.at("time_origin").get<double>();
        m.geometry = geometry_from(j.at("geometry"));
        m.range_clamp_tolerance = j.at("range_clamp_tolerance").get<double>();
        const auto& tr = j.at("training");
        m.dataset_options.inject_prev_noise = tr.at("inject_prev_noise").get<bool>();
        m.dataset_options.stage1_prev_noise_std = tr.at("stage1_prev_noise_std").get<double>();
        m.dataset_options.stage2_prev_noise_std = tr.at("stage2_prev_noise_std").get<double>();
        m.dataset_options.noise_copies = tr.at("noise_copies").get<int>();
        m.dataset_options.noise_ladder = tr.value("noise_ladder", false);
        m.dataset_options.noise_seed = tr.at("noise_seed").get<std::uint64_t>();
        m.dataset_options.range_clamp_tolerance = m.range_clamp_tolerance;
        m.dataset_options.initial_heading = m.initial_heading;
        m.stage1 = nn::model_from_json(j.at("stage1").dump());
        m.stage2 = nn::model_from_json(j.at("stage2").dump());
        if (m.stage1.net.layer_sizes() != kStage1Layers || m.stage2.net.layer_sizes() != kStage2Layers) {
            throw ValidationError("fusion model: stage layer sizes must be 4-32-16-2 and 3-32-16-2");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("fusion model: {}", e.what()));
    }
}

void save_fusion_model(const FusionModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, fusion_model_to_json(model));
}

FusionModel load_fusion_model(const std::filesystem::path& path) {
    try {
        return fusion_model_from_json(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string format_estimates(std::span<const FusionEstimate> estimates) {
    std::string out = "t,px,py,stage1_used\n";
    for (const auto& e : estimates) {
        out += fmt::format("{},{},{},{}\n", e.t, e.final_position.x, e.final_position.y,
                           e.stage1_used ? 1 : 0);
    }
    return out;
}

std::vector<TimedPose> as_timed_poses(std::span<const FusionEstimate> estimates) {
    std::vector<TimedPose> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back({e.t, e.final_position});
    return out;
}

}  // namespace isac::fusion

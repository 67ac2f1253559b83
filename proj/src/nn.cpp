#include "isacfusion/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "isacfusion/rng.hpp"

namespace isac::nn {
namespace {

constexpr const char* kSchema = "isacfusion.mlp";
constexpr int kSchemaVersion = 1;

enum SeedStream : std::uint64_t { kInitStream = 11, kSplitStream = 12, kEpochStream = 13 };

void check_batch(const Mlp& net, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != net.inputs()) {
        throw ValidationError(fmt::format("network expects {} inputs, got {}", net.inputs(),
                                          inputs.rows()));
    }
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, std::span<const Eigen::Index> idx) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(idx[i]);
    return out;
}

std::vector<double> flatten_row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    }
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// --- Mlp --------------------------------------------------------------------

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ValidationError("network needs at least 2 layer sizes");
    for (int s : sizes_) {
        if (s <= 0) throw ValidationError("layer sizes must be positive");
    }
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]),
                           Eigen::VectorXd::Zero(sizes_[i + 1])});
    }
}

Mlp Mlp::glorot(std::vector<int> layer_sizes, std::uint64_t seed) {
    Mlp net(std::move(layer_sizes));
    Rng rng(derive_seed(seed, kInitStream));
    for (auto& layer : net.layers_) {
        const double fan_in = static_cast<double>(layer.weights.cols());
        const double fan_out = static_cast<double>(layer.weights.rows());
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        boost::random::uniform_real_distribution<double> u(-limit, limit);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = u(rng);
        }
    }
    return net;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    return forward_batch(input);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
    check_batch(*this, inputs);
    Eigen::MatrixXd a = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd z = layers_[i].weights * a;
        z.colwise() += layers_[i].biases;
        if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

bool Mlp::all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
        return l.weights.allFinite() && l.biases.allFinite();
    });
}

// --- loss and gradients -----------------------------------------------------

Gradients Gradients::zeros_like(const Mlp& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
        g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                            Eigen::VectorXd::Zero(l.biases.size())});
    }
    return g;
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
        if (l.weights.size()) m = std::max(m, l.weights.cwiseAbs().maxCoeff());
        if (l.biases.size()) m = std::max(m, l.biases.cwiseAbs().maxCoeff());
    }
    return m;
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.cols() == 0) throw ValidationError("mse_loss: empty batch");
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw ValidationError(fmt::format("mse_loss: shapes {}x{} and {}x{} differ", pred.rows(),
                                          pred.cols(), truth.rows(), truth.cols()));
    }
    return (pred - truth).colwise().squaredNorm().sum() / static_cast<double>(pred.cols());
}

LossAndGradients backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets) {
    check_batch(net, inputs);
    const auto& layers = net.layers();
    const std::size_t n_layers = layers.size();

    // Forward pass keeping every activation (activations[0] is the input).
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(n_layers + 1);
    activations.push_back(inputs);
    for (std::size_t i = 0; i < n_layers; ++i) {
        Eigen::MatrixXd z = layers[i].weights * activations.back();
        z.colwise() += layers[i].biases;
        if (i + 1 < n_layers) z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }

    LossAndGradients out;
    out.loss = mse_loss(activations.back(), targets);
    out.grads = Gradients::zeros_like(net);

    const double n = static_cast<double>(inputs.cols());
    Eigen::MatrixXd delta = (2.0 / n) * (activations.back() - targets);
    for (std::size_t i = n_layers; i-- > 0;) {
        out.grads.layers[i].weights = delta * activations[i].transpose();
        out.grads.layers[i].biases = delta.rowwise().sum();
        if (i == 0) break;
        delta = layers[i].weights.transpose() * delta;
        // ReLU gate of the layer below; a post-activation of exactly 0 has zero slope.
        delta = delta.cwiseProduct((activations[i].array() > 0.0).cast<double>().matrix());
    }
    return out;
}

// --- Adam -------------------------------------------------------------------

AdamState AdamState::for_net(const Mlp& net, AdamConfig cfg) {
    return {cfg, Gradients::zeros_like(net), Gradients::zeros_like(net), 0};
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment, long step,
                 const AdamConfig& cfg) {
    if (grads.size() != params.size() || first_moment.size() != params.size() ||
        second_moment.size() != params.size()) {
        throw ValidationError("adam_update: parameter block sizes differ");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        first_moment[i] = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * g;
        second_moment[i] = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = first_moment[i] / bc1;
        const double v_hat = second_moment[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
    auto& layers = net.layers();
    if (grads.layers.size() != layers.size() || state.first_moment.layers.size() != layers.size()) {
        throw ValidationError("adam_step: gradient layout does not match network");
    }
    const long step = ++state.step_count;
    auto span_of = [](auto& m) { return std::span(m.data(), static_cast<std::size_t>(m.size())); };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_update(span_of(layers[i].weights), span_of(grads.layers[i].weights),
                    span_of(state.first_moment.layers[i].weights),
                    span_of(state.second_moment.layers[i].weights), step, state.config);
        adam_update(span_of(layers[i].biases), span_of(grads.layers[i].biases),
                    span_of(state.first_moment.layers[i].biases),
                    span_of(state.second_moment.layers[i].biases), step, state.config);
    }
}

// --- normalisation ------------------------------------------------------------

Standardizer Standardizer::identity(int dims) {
    return {Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims)};
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& samples) {
    if (samples.cols() == 0) throw ValidationError("Standardizer::fit: no samples");
    Standardizer s;
    s.mean = samples.rowwise().mean();
    const Eigen::MatrixXd centred = samples.colwise() - s.mean;
    s.scale = (centred.rowwise().squaredNorm() / static_cast<double>(samples.cols())).cwiseSqrt();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
        if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    return (x.colwise() - mean).array().colwise() / scale.array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& z) const {
    return (z.array().colwise() * scale.array()).matrix().colwise() + mean;
}

Eigen::VectorXd Model::predict(const Eigen::VectorXd& x) const { return predict_batch(x); }

Eigen::MatrixXd Model::predict_batch(const Eigen::MatrixXd& x) const {
    return target_norm.invert(net.forward_batch(input_norm.apply(x)));
}

// --- training ---------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("train: max_epochs must be >= 1");
    if (patience < 0) throw ValidationError("train: patience must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ValidationError("train: validation_fraction must lie in (0, 1)");
    }
    if (!(adam.learning_rate > 0.0)) throw ValidationError("train: learning rate must be > 0");
}

TrainResult train(const std::vector<int>& layer_sizes, const Dataset& data,
                  const TrainConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = data.size();
    if (data.targets.cols() != n) throw ValidationError("train: inputs and targets differ in count");
    if (layer_sizes.empty() || data.inputs.rows() != layer_sizes.front() ||
        data.targets.rows() != layer_sizes.back()) {
        throw ValidationError("train: dataset dimensions do not match layer sizes");
    }
    if (static_cast<double>(n) < 2.0 / cfg.validation_fraction) {
        throw ValidationError(fmt::format(
            "train: {} samples is too few for validation fraction {}", n, cfg.validation_fraction));
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng split_rng(derive_seed(cfg.rng_seed, kSplitStream));
    shuffle(order, split_rng);
    const auto n_val = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::llround(cfg.validation_fraction * static_cast<double>(n))));
    const std::span<const Eigen::Index> val_idx(order.data(), static_cast<std::size_t>(n_val));
    std::vector<Eigen::Index> train_idx(order.begin() + n_val, order.end());

    const Eigen::MatrixXd x_train_raw = select_columns(data.inputs, train_idx);
    const Eigen::MatrixXd y_train_raw = select_columns(data.targets, train_idx);
    const Eigen::MatrixXd x_val_raw = select_columns(data.inputs, val_idx);
    const Eigen::MatrixXd y_val = select_columns(data.targets, val_idx);

    Model model;
    model.input_norm = Standardizer::fit(x_train_raw);
    model.target_norm = Standardizer::fit(y_train_raw);
    model.net = Mlp::glorot(layer_sizes, cfg.rng_seed);

    const Eigen::MatrixXd x_train = model.input_norm.apply(x_train_raw);
    const Eigen::MatrixXd y_train = model.target_norm.apply(y_train_raw);

    auto validation_loss = [&](const Model& m) { return mse_loss(m.predict_batch(x_val_raw), y_val); };

    TrainResult result;
    result.initial_validation_loss = validation_loss(model);
    result.best_validation_loss = result.initial_validation_loss;
    result.model = model;

    AdamState adam = AdamState::for_net(model.net, cfg.adam);
    std::vector<Eigen::Index> batch_order(train_idx.size());
    std::iota(batch_order.begin(), batch_order.end(), Eigen::Index{0});
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.rng_seed, kEpochStream, static_cast<std::uint64_t>(epoch)));
        shuffle(batch_order, epoch_rng);

        int batch_index = 0;
        for (std::size_t start = 0; start < batch_order.size();
             start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t end =
                std::min(batch_order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const Eigen::Index> idx(batch_order.data() + start, end - start);
            const auto lg = backward(model.net, select_columns(x_train, idx),
                                     select_columns(y_train, idx));
            if (!std::isfinite(lg.loss)) {
                throw TrainingError(fmt::format("non-finite loss at epoch {}, batch {}", epoch,
                                                batch_index),
                                    epoch, batch_index);
            }
            adam_step(model.net, lg.grads, adam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = mse_loss(model.predict_batch(x_train_raw), y_train_raw);
        rec.validation_loss = validation_loss(model);
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_loss)) {
            throw TrainingError(fmt::format("non-finite loss after epoch {}", epoch), epoch,
                                batch_index);
        }
        result.history.push_back(rec);

        if (rec.validation_loss < result.best_validation_loss) {
            result.best_validation_loss = rec.validation_loss;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best > cfg.patience) {
            break;
        }
    }
    return result;
}

// --- model files --------------------------------------------------------------

std::string model_to_json(const Model& model) {
    nlohmann::ordered_json j;
    j["schema"] = kSchema;
    j["version"] = kSchemaVersion;
    j["layer_sizes"] = model.net.layer_sizes();
    j["hidden_activation"] = "relu";
    auto norm = [](const Standardizer& s) {
        return nlohmann::ordered_json{
            {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
    };
    j["input_norm"] = norm(model.input_norm);
    j["target_norm"] = norm(model.target_norm);
    auto layers = nlohmann::ordered_json::array();
    for (const auto& l : model.net.layers()) {
        layers.push_back({{"weights", flatten_row_major(l.weights)},
                          {"biases", std::vector<double>(l.biases.data(),
                                                         l.biases.data() + l.biases.size())}});
    }
    j["layers"] = std::move(layers);
    return j.dump(1) + "\n";
}

Model model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema").get<std::string>() != kSchema) {
            throw ValidationError("model file: unexpected schema");
        }
        if (j.at("version").get<int>() != kSchemaVersion) {
            throw ValidationError(
                fmt::format("model file: unsupported version {}", j.at("version").get<int>()));
        }
        Model model;
        model.net = Mlp(j.at("layer_sizes").get<std::vector<int>>());
        auto read_norm = [&](const nlohmann::json& o, int dims) {
            Standardizer s{to_vector(o.at("mean").get<std::vector<double>>()),
                           to_vector(o.at("scale").get<std::vector<double>>())};
            if (s.mean.size() != dims || s.scale.size() != dims) {
                throw ValidationError("model file: normaliser size mismatch");
            }
            return s;
        };
        model.input_norm = read_norm(j.at("input_norm"), model.net.inputs());
        model.target_norm = read_norm(j.at("target_norm"), model.net.outputs());
        const auto& layers = j.at("layers");
        if (layers.size() != model.net.layers().size()) {
            throw ValidationError("model file: layer count mismatch");
        }
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = model.net.layers()[i];
            const auto w = layers[i].at("weights").get<std::vector<double>>();
            const auto b = layers[i].at("biases").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != l.weights.size() ||
                static_cast<Eigen::Index>(b.size()) != l.biases.size()) {
                throw ValidationError(fmt::format("model file: layer {} has wrong size", i));
            }
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = w[k++];
            }
            l.biases = to_vector(b);
        }
        if (!model.net.all_finite()) throw ValidationError("model file: non-finite parameter");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("model file: {}", e.what()));
    }
}

}  // namespace isac::nn

#pragma once

// Small fully connected regressors: ReLU hidden layers, identity output,
// mean-squared-error loss, Adam, mini-batch training with a seeded
// train/validation split.
//
// Batches are column-major: one sample per column.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "isacfusion/error.hpp"

namespace isac::nn {

struct Layer {
    Eigen::MatrixXd weights;  ///< out x in
    Eigen::VectorXd biases;   ///< out
};

class Mlp {
public:
    Mlp() = default;
    /// Zero-initialised network. Throws ValidationError on < 2 layers or a
    /// non-positive width.
    explicit Mlp(std::vector<int> layer_sizes);

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    static Mlp glorot(std::vector<int> layer_sizes, std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    int inputs() const { return sizes_.front(); }
    int outputs() const { return sizes_.back(); }
    std::size_t parameter_count() const;

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    bool all_finite() const;

private:
    std::vector<int> sizes_;
    std::vector<Layer> layers_;
};

/// Gradients mirroring an Mlp's layer shapes.
struct Gradients {
    std::vector<Layer> layers;

    static Gradients zeros_like(const Mlp& net);
    double max_abs() const;
};

/// mean over columns of || pred - truth ||^2. Throws on empty or mismatched batches.
double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Reverse-mode gradients of mse_loss(forward(inputs), targets).
/// The ReLU derivative at exactly 0 is taken as 0.
LossAndGradients backward(const Mlp& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates, shaped like the network.
struct AdamState {
    AdamConfig config;
    Gradients first_moment;
    Gradients second_moment;
    long step_count = 0;

    static AdamState for_net(const Mlp& net, AdamConfig cfg = {});
};

/// In-place Adam update of a flat parameter block. `step` is the
/// 1-based index of this update (used for bias correction).
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment, long step,
                 const AdamConfig& cfg);

/// One Adam step over every weight and bias of `net`; increments state.step_count.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

/// Affine per-feature standardisation, z = (x - mean) / scale.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer identity(int dims);
    /// Features with (near) zero spread get scale 1.
    static Standardizer fit(const Eigen::MatrixXd& samples);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const;
};

/// An Mlp wrapped with its input and target standardisers; speaks physical units.
struct Model {
    Mlp net;
    Standardizer input_norm;
    Standardizer target_norm;

    Eigen::VectorXd predict(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& x) const;
};

struct Dataset {
    Eigen::MatrixXd inputs;   ///< features x samples
    Eigen::MatrixXd targets;  ///< outputs x samples

    Eigen::Index size() const { return inputs.cols(); }
};

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 500;
    int patience = 20;
    double validation_fraction = 0.2;
    std::uint64_t rng_seed = 7;
    AdamConfig adam;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;       ///< mean squared error, physical units
    double validation_loss = 0.0;  ///< mean squared error, physical units
};

struct TrainResult {
    Model model;                 ///< parameters from the best validation epoch
    std::vector<EpochRecord> history;
    double initial_validation_loss = 0.0;
    int best_epoch = 0;          ///< 0 means the initial parameters were never beaten
    double best_validation_loss = 0.0;
};

/// Seeded 80/20-style split, standardisers fitted on the training part,
/// Glorot initialisation, Adam mini-batches, early stopping on validation
/// loss. Throws ValidationError if the dataset is too small and
/// TrainingError on a non-finite loss.
TrainResult train(const std::vector<int>& layer_sizes, const Dataset& data,
                  const TrainConfig& cfg);

/// Model document (JSON): schema version, layer sizes, standardisers and
/// row-major parameter arrays. Doubles round-trip exactly.
std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

}  // namespace isac::nn

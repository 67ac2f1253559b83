#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isacfusion/nn.hpp"
#include "oracles.hpp"

using namespace isac;
using namespace isac::nn;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Dataset linear_dataset(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d{Eigen::MatrixXd(1, n), Eigen::MatrixXd(1, n)};
    for (int i = 0; i < n; ++i) {
        d.inputs(0, i) = u(rng);
        d.targets(0, i) = 2.0 * d.inputs(0, i);
    }
    return d;
}

}  // namespace

TEST(Mlp, ZeroWeightsOutputBias) {
    Mlp net({3, 4, 2});
    net.layers().back().biases << 1.5, -2.0;
    const auto y = net.forward(Eigen::Vector3d{1.0, -2.0, 3.0});
    EXPECT_EQ(y, Eigen::Vector2d(1.5, -2.0));
}

TEST(Mlp, ReluGatesNegativeInput) {
    Mlp net({1, 1, 1});
    for (auto& l : net.layers()) l.weights.setOnes();
    EXPECT_EQ(net.forward(Eigen::VectorXd::Constant(1, -5.0))(0), 0.0);
    EXPECT_EQ(net.forward(Eigen::VectorXd::Constant(1, 5.0))(0), 5.0);
}

TEST(Mlp, IdentityLinearNet) {
    Mlp net({2, 2});
    net.layers()[0].weights.setIdentity();
    const Eigen::Vector2d x{0.7, -3.1};
    EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, RejectsBadShapes) {
    EXPECT_THROW(Mlp({3}), ValidationError);
    EXPECT_THROW(Mlp({3, 0, 2}), ValidationError);
    Mlp net({3, 2});
    EXPECT_THROW(net.forward(Eigen::Vector2d::Zero()), ValidationError);
}

TEST(Mlp, PositivelyHomogeneousWithoutBiases) {
    std::mt19937_64 rng(2);
    const auto net = Mlp::glorot({4, 16, 8, 2}, 3);
    const Eigen::VectorXd x = random_matrix(4, 1, rng);
    for (double c : {0.5, 2.0, 10.0}) {
        EXPECT_LT((net.forward(c * x) - c * net.forward(x)).norm(), 1e-12 * (1.0 + c));
    }
}

TEST(Mlp, GlorotBoundsAndDeterminism) {
    const auto a = Mlp::glorot({4, 32, 16, 2}, 9);
    const auto b = Mlp::glorot({4, 32, 16, 2}, 9);
    EXPECT_EQ(a.parameter_count(), 4u * 32 + 32 + 32 * 16 + 16 + 16 * 2 + 2);
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        const auto& w = a.layers()[l].weights;
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
        EXPECT_EQ(a.layers()[l].biases, Eigen::VectorXd::Zero(w.rows()));
        EXPECT_EQ(w, b.layers()[l].weights);
    }
}

TEST(MseLoss, Examples) {
    Eigen::MatrixXd p(2, 1);
    Eigen::MatrixXd t(2, 1);
    p << 0, 0;
    t << 3, 4;
    EXPECT_EQ(mse_loss(p, p), 0.0);
    EXPECT_EQ(mse_loss(p, t), 25.0);
    Eigen::MatrixXd p2(2, 2);
    Eigen::MatrixXd t2(2, 2);
    p2 << 0, 1, 0, 1;
    t2 << 3, 1, 4, 1;
    EXPECT_EQ(mse_loss(p2, t2), 12.5);
    EXPECT_THROW(mse_loss(Eigen::MatrixXd(2, 0), Eigen::MatrixXd(2, 0)), ValidationError);
    EXPECT_THROW(mse_loss(p, p2), ValidationError);
}

TEST(Backward, ZeroErrorGivesZeroGradients) {
    const auto net = Mlp::glorot({3, 5, 2}, 1);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd x = random_matrix(3, 4, rng);
    const auto lg = backward(net, x, net.forward_batch(x));
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_EQ(lg.grads.max_abs(), 0.0);
}

TEST(Backward, SingleLinearNeuron) {
    Mlp net({1, 1});
    net.layers()[0].weights(0, 0) = 1.0;
    const auto lg = backward(net, Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Zero(1, 1));
    EXPECT_EQ(lg.loss, 1.0);
    EXPECT_EQ(lg.grads.layers[0].weights(0, 0), 2.0);
    EXPECT_EQ(lg.grads.layers[0].biases(0), 2.0);
}

TEST(Backward, MatchesCentralDifferences) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> width(1, 12);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<int> sizes{width(rng), width(rng), width(rng), 2};
        auto net = Mlp::glorot(sizes, static_cast<std::uint64_t>(trial));
        for (auto& l : net.layers()) l.biases = random_matrix(l.biases.size(), 1, rng) * 0.1;
        const Eigen::MatrixXd x = random_matrix(sizes[0], 5, rng);
        const Eigen::MatrixXd y = random_matrix(2, 5, rng);
        const auto lg = backward(net, x, y);
        EXPECT_NEAR(lg.loss, oracle::reference_mse(oracle::trace_forward(net, x).output, y), 1e-12);
        const auto check = oracle::check_gradients(net, x, y, lg.grads);
        EXPECT_LT(check.max_relative_error, 1e-4) << "trial " << trial;
        EXPECT_GT(check.compared, 0);
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto net = Mlp::glorot({2, 3, 1}, 5);
    const auto before = net;
    auto state = AdamState::for_net(net);
    adam_step(net, Gradients::zeros_like(net), state);
    EXPECT_EQ(state.step_count, 1);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        EXPECT_EQ(net.layers()[l].weights, before.layers()[l].weights);
        EXPECT_EQ(net.layers()[l].biases, before.layers()[l].biases);
    }
}

TEST(Adam, FirstStepMatchesReference) {
    double p = 0.5;
    double m = 0.0;
    double v = 0.0;
    const AdamConfig cfg;
    adam_update({&p, 1}, std::span<const double>(std::array{1.0}), {&m, 1}, {&v, 1}, 1, cfg);
    const auto ref = oracle::reference_adam({0.5, 0.0, 0.0}, 1.0, 1, 1e-3, 0.9, 0.999, 1e-8);
    EXPECT_NEAR(p, ref.param, 1e-15);
    EXPECT_NEAR(p, 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(m, ref.m, 1e-15);
    EXPECT_NEAR(v, ref.v, 1e-15);
}

TEST(Adam, ConstantGradientStepDoesNotGrow) {
    double p = 0.0;
    double m = 0.0;
    double v = 0.0;
    const std::array g{0.3};
    adam_update({&p, 1}, g, {&m, 1}, {&v, 1}, 1, {});
    const double first = -p;
    const double mid = p;
    adam_update({&p, 1}, g, {&m, 1}, {&v, 1}, 2, {});
    const double second = mid - p;
    EXPECT_LE(second, first * (1.0 + 1e-12));
}

TEST(Adam, RandomUpdatesMatchReference) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<long> step(1, 200);
    for (int i = 0; i < 200; ++i) {
        AdamConfig cfg;
        cfg.learning_rate = 1e-3 * (1.0 + u(rng));
        const oracle::AdamScalar s{u(rng), 0.1 * u(rng), 0.01 * std::abs(u(rng))};
        const double g = u(rng);
        const long t = step(rng);
        double p = s.param;
        double m = s.m;
        double v = s.v;
        adam_update({&p, 1}, std::span<const double>(&g, 1), {&m, 1}, {&v, 1}, t, cfg);
        const auto ref = oracle::reference_adam(s, g, t, cfg.learning_rate, cfg.beta1, cfg.beta2,
                                                cfg.epsilon);
        EXPECT_NEAR(p, ref.param, 1e-10);
        EXPECT_NEAR(m, ref.m, 1e-10);
        EXPECT_NEAR(v, ref.v, 1e-10);
    }
}

TEST(Standardizer, FitApplyInvert) {
    Eigen::MatrixXd x(2, 4);
    x << 1, 2, 3, 4, 5, 5, 5, 5;
    const auto s = Standardizer::fit(x);
    const auto z = s.apply(x);
    EXPECT_NEAR(z.row(0).mean(), 0.0, 1e-12);
    EXPECT_EQ(s.scale(1), 1.0);
    EXPECT_LT((s.invert(z) - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, LearnsLinearMap) {
    TrainConfig cfg;
    cfg.max_epochs = 200;
    const auto r = train({1, 16, 1}, linear_dataset(1000, 4), cfg);
    EXPECT_LT(r.best_validation_loss, 1e-3);
    EXPECT_LE(r.best_validation_loss, r.initial_validation_loss);
}

TEST(Train, SameSeedSameHistory) {
    TrainConfig cfg;
    cfg.max_epochs = 15;
    const auto data = linear_dataset(200, 5);
    const auto a = train({1, 8, 1}, data, cfg);
    const auto b = train({1, 8, 1}, data, cfg);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].validation_loss, b.history[i].validation_loss);
    }
    EXPECT_EQ(model_to_json(a.model), model_to_json(b.model));
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovingEpoch) {
    TrainConfig cfg;
    cfg.patience = 0;
    cfg.max_epochs = 500;
    cfg.adam.learning_rate = 0.05;
    const auto r = train({1, 8, 1}, linear_dataset(200, 6), cfg);
    ASSERT_FALSE(r.history.empty());
    const auto& h = r.history;
    double best = r.initial_validation_loss;
    for (std::size_t i = 0; i + 1 < h.size(); ++i) {
        EXPECT_LT(h[i].validation_loss, best);
        best = h[i].validation_loss;
    }
    if (static_cast<int>(h.size()) < cfg.max_epochs) {
        EXPECT_GE(h.back().validation_loss, best);
    }
}

TEST(Train, NeverWorseThanInitialParameters) {
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.adam.learning_rate = 5.0;
    const auto r = train({1, 8, 1}, linear_dataset(100, 7), cfg);
    EXPECT_LE(r.best_validation_loss, r.initial_validation_loss);
}

TEST(Train, RejectsTinyDatasetAndReportsNonFiniteLoss) {
    EXPECT_THROW(train({1, 4, 1}, linear_dataset(5, 1), TrainConfig{}), ValidationError);
    auto data = linear_dataset(100, 1);
    data.targets(0, 3) = std::numeric_limits<double>::infinity();
    try {
        train({1, 4, 1}, data, TrainConfig{});
        FAIL();
    } catch (const ValidationError&) {
    } catch (const TrainingError& e) {
        EXPECT_GE(e.epoch(), 0);
    }
}

TEST(ModelFile, RoundTripIsBitExact) {
    TrainConfig cfg;
    cfg.max_epochs = 5;
    const auto m = train({1, 8, 1}, linear_dataset(100, 2), cfg).model;
    const auto text = model_to_json(m);
    const auto back = model_from_json(text);
    EXPECT_EQ(model_to_json(back), text);
    for (std::size_t l = 0; l < m.net.layers().size(); ++l) {
        EXPECT_EQ(back.net.layers()[l].weights, m.net.layers()[l].weights);
    }
    EXPECT_EQ(back.predict(Eigen::VectorXd::Constant(1, 0.3)), m.predict(Eigen::VectorXd::Constant(1, 0.3)));
    EXPECT_THROW(model_from_json("{}"), ValidationError);
    EXPECT_THROW(model_from_json("not json"), ValidationError);
}

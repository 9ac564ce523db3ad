#include "xmargin/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace xmargin;

namespace {

ParameterGradients filled(const MlpModel& m, double v) {
    ParameterGradients g = ParameterGradients::zeros_like(m);
    for (auto& l : g.layers) {
        std::fill(l.weights.begin(), l.weights.end(), v);
        std::fill(l.biases.begin(), l.biases.end(), v);
    }
    return g;
}

// Two uniform blocks separated along the first axis at x0 = 0.5.
Dataset separable(std::size_t n, std::uint64_t seed) {
    Dataset d;
    d.cols = 2;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double x0 = label == 1 ? uniform(rng, 0.6, 1.0) : uniform(rng, 0.0, 0.4);
        d.features.push_back(x0);
        d.features.push_back(uniform(rng, 0.0, 1.0));
        d.labels.push_back(label);
    }
    d.rows = n;
    return d;
}

} // namespace

TEST(OptimizerMethod, Parses) {
    EXPECT_EQ(parse_optimizer("subgradient"), OptimizerMethod::SubgradientDescent);
    EXPECT_EQ(parse_optimizer("sgd"), OptimizerMethod::SubgradientDescent);
    EXPECT_EQ(parse_optimizer("rmsprop"), OptimizerMethod::RmsProp);
    EXPECT_THROW(parse_optimizer("adam"), std::invalid_argument);
}

TEST(OptimizerConfig, Defaults) {
    const OptimizerConfig c;
    EXPECT_EQ(c.method, OptimizerMethod::RmsProp);
    EXPECT_EQ(c.alpha, 0.001);
    EXPECT_EQ(c.decay, 0.9);
    EXPECT_EQ(c.epsilon_stab, 1e-8);
    EXPECT_TRUE(OptimizerConfig::subgradient(0.1).track_best);
    EXPECT_FALSE(OptimizerConfig::rmsprop(0.1).track_best);
}

TEST(OptimizerConfig, Validation) {
    OptimizerConfig c;
    c.alpha = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.alpha = 0.0;
    EXPECT_NO_THROW(c.validate());
    c.decay = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.decay = 0.9;
    c.epsilon_stab = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SubgradientStep, MovesAgainstTheGradient) {
    const std::vector<double> w = {1.0, -2.0};
    TrainState s(make_single_layer_model(w));
    ParameterGradients g = ParameterGradients::zeros_like(s.model);
    g.layers[0].weights = {0.5, -4.0};
    subgradient_step(s, g, 0.1);
    EXPECT_DOUBLE_EQ(s.model.layers[0].weights[0], 0.95);
    EXPECT_DOUBLE_EQ(s.model.layers[0].weights[1], -1.6);
    EXPECT_EQ(s.model.layers[0].biases[0], 0.0);
    EXPECT_EQ(s.step, 1u);
}

TEST(RmsProp, FrozenFirstTwoSteps) {
    const std::vector<double> w = {0.0};
    TrainState s(make_single_layer_model(w));
    const OptimizerConfig c = OptimizerConfig::rmsprop(0.01);
    ParameterGradients g = ParameterGradients::zeros_like(s.model);
    g.layers[0].weights = {1.0};
    rmsprop_step(s, g, c);
    EXPECT_NEAR(s.model.layers[0].weights[0], -0.03162277560168383, 1e-16);
    EXPECT_NEAR(s.accumulators.layers[0].weights[0], 0.1, 1e-16);
    g.layers[0].weights = {-2.0};
    rmsprop_step(s, g, c);
    EXPECT_NEAR(s.model.layers[0].weights[0], -0.003051347438418513, 1e-16);
}

TEST(RmsProp, ZeroGradientLeavesParameters) {
    const MlpModel m = build_boundary_model(2, 1);
    TrainState s(m);
    rmsprop_step(s, ParameterGradients::zeros_like(m), OptimizerConfig::rmsprop(0.1));
    EXPECT_EQ(s.model, m);
}

TEST(Step, RejectsNonFiniteOrMisshapenGradients) {
    const MlpModel m = build_boundary_model(2, 1);
    TrainState s(m);
    EXPECT_THROW(subgradient_step(s, filled(m, NAN), 0.1), OptimizerError);
    EXPECT_THROW(rmsprop_step(s, filled(m, INFINITY), OptimizerConfig{}), OptimizerError);
    EXPECT_THROW(subgradient_step(s, ParameterGradients::zeros_like(build_boundary_model(3, 1)), 0.1), OptimizerError);
    EXPECT_EQ(s.model, m);
    EXPECT_EQ(s.step, 0u);
}

TEST(TrainState, KeepsBestIterate) {
    const std::vector<double> w = {1.0};
    TrainState s(make_single_layer_model(w));
    s.observe_loss(3.0);
    s.model.layers[0].weights[0] = 2.0;
    s.observe_loss(1.0);
    s.model.layers[0].weights[0] = 3.0;
    s.observe_loss(2.0);
    EXPECT_EQ(s.best_loss, 1.0);
    EXPECT_EQ(s.best_model->layers[0].weights[0], 2.0);
}

TEST(VerifySubgradient, AbsoluteValueAtZero) {
    auto f = [](std::span<const double> t) { return std::abs(t[0]); };
    const std::vector<double> theta0 = {0.0};
    std::vector<std::vector<double>> probes;
    for (int i = -10; i <= 10; ++i) probes.push_back({i / 10.0});
    EXPECT_TRUE(verify_subgradient(f, theta0, std::vector<double>{0.5}, probes).passed);
    EXPECT_TRUE(verify_subgradient(f, theta0, std::vector<double>{1.0}, probes).passed);
    const SubgradientCheck bad = verify_subgradient(f, theta0, std::vector<double>{2.0}, probes);
    EXPECT_FALSE(bad.passed);
    EXPECT_NEAR(bad.worst_slack, -1.0, 1e-15);
    EXPECT_EQ(probes[bad.worst_probe][0], 1.0);
}

TEST(VerifySubgradient, RejectsMalformedInput) {
    auto f = [](std::span<const double> t) { return t[0] * t[0]; };
    const std::vector<double> theta0 = {1.0};
    EXPECT_THROW(verify_subgradient(f, theta0, std::vector<double>{2.0}, {}), std::invalid_argument);
    const std::vector<std::vector<double>> probes = {{1.0, 2.0}};
    EXPECT_THROW(verify_subgradient(f, theta0, std::vector<double>{2.0}, probes), std::invalid_argument);
}

TEST(Train, ZeroStepLeavesModelAndAccuracyUnchanged) {
    const Dataset d = separable(40, 1);
    const MlpModel m = build_boundary_model(2, 3);
    OptimizerConfig c = OptimizerConfig::rmsprop(0.0);
    Rng rng(1);
    const TrainResult r = train(m, d, LossParams::xtreme(1, 1), c, {1, 8}, rng);
    EXPECT_EQ(r.model, m);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.history[0].train_acc, model_accuracy(m, d));
    EXPECT_EQ(r.steps, 5u);
}

TEST(Train, HistoryHasOneRecordPerEpoch) {
    const Dataset d = separable(30, 2);
    Rng rng(1);
    const TrainResult r = train(build_boundary_model(2, 1), d, LossParams::bce(), OptimizerConfig{}, {7, 16}, rng, &d);
    ASSERT_EQ(r.history.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(r.history[i].epoch, i + 1);
        ASSERT_TRUE(r.history[i].eval_acc.has_value());
        EXPECT_EQ(*r.history[i].eval_acc, r.history[i].train_acc);
    }
    EXPECT_EQ(r.steps, 14u);
}

TEST(Train, SameSeedSameModel) {
    const Dataset d = separable(50, 3);
    Rng a(9), b(9);
    const auto ra = train(build_paper_model(2, 1), d, LossParams::xtreme(2, 2), OptimizerConfig{}, {3, 8}, a);
    const auto rb = train(build_paper_model(2, 1), d, LossParams::xtreme(2, 2), OptimizerConfig{}, {3, 8}, b);
    EXPECT_EQ(ra.model, rb.model);
}

TEST(Train, EveryLossLearnsASeparableProblem) {
    const Dataset d = separable(200, 4);
    for (const LossParams& loss : {LossParams::xtreme(10, 10), LossParams::bce(), LossParams::hinge()}) {
        Rng rng(5);
        const auto r = train(build_boundary_model(2, 6), d, loss, OptimizerConfig::rmsprop(0.01), {60, 16}, rng);
        EXPECT_GE(model_accuracy(r.model, d), 0.9) << to_string(loss.family);
    }
}

TEST(Train, SubgradientTrackingReturnsBestObservedLoss) {
    const Dataset d = separable(60, 5);
    Rng rng(5);
    const auto r = train(build_boundary_model(2, 6), d, LossParams::xtreme(1, 1), OptimizerConfig::subgradient(0.5),
                         {20, 8}, rng);
    ASSERT_TRUE(r.best_loss.has_value());
    EXPECT_DOUBLE_EQ(dataset_loss(r.model, d, LossParams::xtreme(1, 1)), *r.best_loss);
    EXPECT_LE(*r.best_loss, dataset_loss(build_boundary_model(2, 6), d, LossParams::xtreme(1, 1)));
}

TEST(Train, RejectsBadArguments) {
    const Dataset d = separable(10, 1);
    Rng rng(0);
    EXPECT_THROW(train(build_boundary_model(3, 1), d, LossParams::bce(), {}, {1, 4}, rng), std::invalid_argument);
    EXPECT_THROW(train(build_boundary_model(2, 1), d, LossParams::bce(), {}, {0, 4}, rng), std::invalid_argument);
    EXPECT_THROW(train(build_boundary_model(2, 1), d, LossParams::bce(), {}, {1, 0}, rng), std::invalid_argument);
}

TEST(Train, RejectsNonFiniteStartingPoint) {
    const Dataset d = separable(10, 1);
    MlpModel m = build_boundary_model(2, 1);
    m.layers[0].weights[0] = NAN;
    Rng rng(0);
    EXPECT_THROW(train(m, d, LossParams::xtreme(1, 1), {}, {1, 4}, rng), std::invalid_argument);
}

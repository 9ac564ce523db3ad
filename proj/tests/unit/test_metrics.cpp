#include "xmargin/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace xmargin;

namespace {

double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0.0;
    for (double p : pos)
        for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

} // namespace

TEST(Confusion, Counts) {
    const std::vector<int> pred = {1, 1, 0, 0, 1};
    const std::vector<int> truth = {1, 0, 0, 1, 1};
    const ConfusionCounts c = confusion(pred, truth);
    EXPECT_EQ(c, (ConfusionCounts{2, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(accuracy(pred, truth), 0.6);
}

TEST(Confusion, RejectsMismatchedOrEmpty) {
    EXPECT_THROW(confusion(std::vector<int>{1}, std::vector<int>{1, 0}), std::invalid_argument);
    EXPECT_THROW(confusion(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
    EXPECT_THROW(confusion(std::vector<int>{2}, std::vector<int>{1}), std::domain_error);
}

TEST(ConditionalAccuracy, PerClass) {
    const std::vector<int> pred = {1, 1, 0, 0, 1};
    const std::vector<int> truth = {1, 0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(conditional_accuracy(pred, truth, 1), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(conditional_accuracy(pred, truth, 0), 0.5);
}

TEST(ConditionalAccuracy, UndefinedWithoutMembers) {
    const std::vector<int> pred = {1, 0};
    const std::vector<int> truth = {1, 1};
    EXPECT_THROW(conditional_accuracy(pred, truth, 0), std::domain_error);
}

TEST(PrecisionRecall, DefinedAndUndefined) {
    const PrecisionRecall pr = precision_recall({2, 1, 1, 1});
    EXPECT_DOUBLE_EQ(*pr.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*pr.recall, 2.0 / 3.0);
    const PrecisionRecall none = precision_recall({0, 0, 5, 0});
    EXPECT_FALSE(none.precision.has_value());
    EXPECT_FALSE(none.recall.has_value());
}

TEST(Auc, KnownValues) {
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.1, 0.2}), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.1}, std::vector<double>{0.9}), 0.0);
    EXPECT_EQ(auc(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5}), 0.5);
    EXPECT_EQ(auc(std::vector<double>{0.3, 0.7}, std::vector<double>{0.5, 0.3}), 0.625);
}

TEST(Auc, EqualsAllPairsCountWithTies) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> size(1, 40), level(0, 9);
        std::vector<double> pos(size(rng)), neg(size(rng));
        for (double& v : pos) v = level(rng) / 10.0;
        for (double& v : neg) v = level(rng) / 10.0;
        ASSERT_EQ(auc(pos, neg), brute_force_auc(pos, neg)) << "trial " << trial;
    }
}

TEST(Auc, RejectsEmptyOrNan) {
    EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{0.1}), std::invalid_argument);
    EXPECT_THROW(auc(std::vector<double>{NAN}, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(ConditionalRisk, FrozenValue) {
    EXPECT_NEAR(conditional_risk(0.7, LabelConfidence::from_p1(0.25), LossParams::xtreme(1, 1)), 1.7258317719821676,
                1e-12);
}

TEST(ConditionalRisk, DegenerateConfidenceIsThePlainLoss) {
    const LossParams p = LossParams::xtreme(2, 3);
    for (double y : {0.1, 0.4, 0.6, 0.95}) {
        EXPECT_EQ(conditional_risk(y, {0.0, 1.0}, p), evaluate_loss(y, 1, p).value);
        EXPECT_EQ(conditional_risk(y, {1.0, 0.0}, p), evaluate_loss(y, 0, p).value);
    }
}

TEST(ConditionalRisk, ConvexCombinationBounds) {
    const LossParams p = LossParams::xtreme(1, 1);
    for (int i = 0; i <= 20; ++i) {
        const double y = i / 20.0;
        const double a = evaluate_loss(y, 0, p).value, b = evaluate_loss(y, 1, p).value;
        const double r = conditional_risk(y, {0.5, 0.5}, p);
        EXPECT_GE(r, std::min(a, b) - 1e-15);
        EXPECT_LE(r, std::max(a, b) + 1e-15);
    }
}

TEST(ConditionalRisk, RejectsInvalidConfidence) {
    const LossParams p = LossParams::xtreme(1, 1);
    EXPECT_THROW(conditional_risk(0.5, {0.6, 0.6}, p), std::domain_error);
    EXPECT_THROW(conditional_risk(0.5, {-0.1, 1.1}, p), std::domain_error);
}

TEST(Bias, IdenticalPerfectModelsHaveZeroBias) {
    const std::vector<int> truth = {1, 0, 1};
    const std::vector<std::vector<double>> preds = {{1, 0, 1}, {1, 0, 1}};
    EXPECT_EQ(bias_estimate(preds, truth).bias, 0.0);
}

TEST(Bias, HandComputed) {
    const std::vector<int> truth = {1, 0};
    const std::vector<std::vector<double>> preds = {{0.8, 0.4}, {0.6, 0.0}};
    // means 0.7 and 0.2: (0.09 + 0.04) / 2
    const BiasReport r = bias_estimate(preds, truth);
    EXPECT_NEAR(r.bias, 0.065, 1e-15);
    EXPECT_NEAR(r.mean_predictions[0], 0.7, 1e-15);
    EXPECT_EQ(r.ensemble_size, 2u);
}

TEST(Bias, InvariantToModelOrder) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>> preds(7, std::vector<double>(30));
    for (auto& p : preds)
        for (double& v : p) v = u(rng);
    std::vector<int> truth(30);
    for (std::size_t i = 0; i < 30; ++i) truth[i] = static_cast<int>(i % 2);
    const double a = bias_estimate(preds, truth).bias;
    std::reverse(preds.begin(), preds.end());
    std::swap(preds[1], preds[4]);
    EXPECT_EQ(bias_estimate(preds, truth).bias, a);
    EXPECT_GE(a, 0.0);
}

TEST(Bias, RequiresEnsembleOfTwo) {
    const std::vector<int> truth = {1};
    const std::vector<std::vector<double>> one = {{0.5}};
    EXPECT_THROW(bias_estimate(one, truth), std::invalid_argument);
    const std::vector<std::vector<double>> ragged = {{0.5}, {0.5, 0.1}};
    EXPECT_THROW(bias_estimate(ragged, truth), std::invalid_argument);
}

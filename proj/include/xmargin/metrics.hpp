#pragma once

#include "loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace xmargin {

/// Confusion counts with the default class (label 1) as positive.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

namespace detail {

inline void check_pair(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size()) throw std::invalid_argument("predictions and labels differ in length");
    if (preds.empty()) throw std::invalid_argument("no instances to evaluate");
}

} // namespace detail

inline ConfusionCounts confusion(std::span<const int> preds, std::span<const int> truth) {
    detail::check_pair(preds, truth);
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        detail::check_label(preds[i]);
        detail::check_label(truth[i]);
        if (truth[i] == 1)
            (preds[i] == 1 ? c.tp : c.fn)++;
        else
            (preds[i] == 1 ? c.fp : c.tn)++;
    }
    return c;
}

inline double accuracy(std::span<const int> preds, std::span<const int> truth) {
    const ConfusionCounts c = confusion(preds, truth);
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// Share of the `on_class` instances that were predicted as `on_class`.
inline double conditional_accuracy(std::span<const int> preds, std::span<const int> truth, int on_class) {
    detail::check_pair(preds, truth);
    detail::check_label(on_class);
    std::size_t members = 0, hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != on_class) continue;
        ++members;
        if (preds[i] == on_class) ++hits;
    }
    if (members == 0)
        throw std::domain_error("undefined conditional accuracy: no instances of class " + std::to_string(on_class));
    return static_cast<double>(hits) / static_cast<double>(members);
}

/// Undefined ratios (0/0) are empty optionals rather than zeros.
struct PrecisionRecall {
    std::optional<double> precision;
    std::optional<double> recall;
};

inline PrecisionRecall precision_recall(const ConfusionCounts& c) {
    PrecisionRecall out;
    if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    return out;
}

/// Probability that a random positive scores above a random negative, ties
/// counted as one half. Computed from midranks of the pooled scores
/// (Mann-Whitney U); every intermediate is a multiple of 1/2, so the result
/// is the same double as the all-pairs count divided by |pos|*|neg|.
inline double auc(std::span<const double> scores_pos, std::span<const double> scores_neg) {
    if (scores_pos.empty() || scores_neg.empty()) throw std::invalid_argument("AUC needs both classes present");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> pooled;
    pooled.reserve(scores_pos.size() + scores_neg.size());
    for (double s : scores_pos) pooled.push_back({s, true});
    for (double s : scores_neg) pooled.push_back({s, false});
    for (const auto& e : pooled)
        if (std::isnan(e.score)) throw std::invalid_argument("AUC score is NaN");
    std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Twice the rank sum of the positives keeps everything integral.
    double twice_rank_sum = 0.0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        std::size_t positives = 0;
        while (j < pooled.size() && pooled[j].score == pooled[i].score) {
            if (pooled[j].positive) ++positives;
            ++j;
        }
        // 1-based ranks i+1..j share the midrank (i+1+j)/2.
        twice_rank_sum += static_cast<double>(positives) * static_cast<double>(i + 1 + j);
        i = j;
    }
    const double m = static_cast<double>(scores_pos.size());
    const double n = static_cast<double>(scores_neg.size());
    const double u = (twice_rank_sum - m * (m + 1.0)) / 2.0;
    return u / (m * n);
}

struct LabelConfidence {
    double p0 = 0.0;
    double p1 = 1.0;

    static LabelConfidence from_p1(double p1) { return {1.0 - p1, p1}; }

    void validate() const {
        if (!std::isfinite(p0) || !std::isfinite(p1) || p0 < 0.0 || p1 < 0.0)
            throw std::domain_error("label confidences must be finite and non-negative");
        if (std::abs(p0 + p1 - 1.0) > 1e-12) throw std::domain_error("label confidences must sum to 1");
    }
};

/// Expected loss of prediction y when the true label is uncertain.
inline double conditional_risk(double y, const LabelConfidence& confidence, const LossParams& params) {
    confidence.validate();
    return confidence.p0 * evaluate_loss(y, 0, params).value + confidence.p1 * evaluate_loss(y, 1, params).value;
}

struct BiasReport {
    std::vector<double> mean_predictions;
    double bias = 0.0;
    std::size_t ensemble_size = 0;
};

/// Squared deviation of the ensemble-mean prediction from the label,
/// averaged over the evaluation set. Per-instance values are summed in
/// sorted order, so the result does not depend on the order of the models.
inline BiasReport bias_estimate(std::span<const std::vector<double>> ensemble_preds, std::span<const int> truth) {
    if (ensemble_preds.size() < 2) throw std::invalid_argument("bias estimate needs an ensemble of at least 2 models");
    if (truth.empty()) throw std::invalid_argument("bias estimate needs a non-empty evaluation set");
    for (const auto& p : ensemble_preds)
        if (p.size() != truth.size()) throw std::invalid_argument("ensemble members disagree on evaluation set size");

    BiasReport out;
    out.ensemble_size = ensemble_preds.size();
    out.mean_predictions.resize(truth.size());
    std::vector<double> column(ensemble_preds.size());
    double total = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        detail::check_label(truth[j]);
        for (std::size_t m = 0; m < ensemble_preds.size(); ++m) column[m] = ensemble_preds[m][j];
        std::sort(column.begin(), column.end());
        const double mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(column.size());
        out.mean_predictions[j] = mean;
        const double dev = mean - static_cast<double>(truth[j]);
        total += dev * dev;
    }
    out.bias = total / static_cast<double>(truth.size());
    return out;
}

} // namespace xmargin

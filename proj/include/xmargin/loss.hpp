#pragma once

// Per-instance loss kernels for binary classification: the Xtreme Margin
// loss with its sigma/gamma/indicator helpers, plus binary cross-entropy and
// hinge baselines. Every kernel returns its value together with a
// derivative with respect to the predicted probability y.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmargin {

enum class LossFamily { XtremeMargin, BinaryCrossEntropy, Hinge };

inline std::string_view to_string(LossFamily family) {
    switch (family) {
    case LossFamily::XtremeMargin: return "xtreme_margin";
    case LossFamily::BinaryCrossEntropy: return "bce";
    case LossFamily::Hinge: return "hinge";
    }
    return "unknown";
}

inline LossFamily parse_loss_family(std::string_view name) {
    if (name == "xtreme_margin" || name == "xm") return LossFamily::XtremeMargin;
    if (name == "bce" || name == "binary_cross_entropy") return LossFamily::BinaryCrossEntropy;
    if (name == "hinge") return LossFamily::Hinge;
    throw std::invalid_argument("unknown loss family '" + std::string(name) + "'");
}

/// Tunable loss hyperparameters. lambda1 weights correct predictions of the
/// non-default class (label 0), lambda2 correct predictions of the default
/// class (label 1). Both are stored but ignored for the baseline families.
struct LossParams {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    LossFamily family = LossFamily::XtremeMargin;

    static LossParams xtreme(double l1, double l2) { return {l1, l2, LossFamily::XtremeMargin}; }
    static LossParams bce() { return {1.0, 1.0, LossFamily::BinaryCrossEntropy}; }
    static LossParams hinge() { return {1.0, 1.0, LossFamily::Hinge}; }

    void validate() const {
        if (!std::isfinite(lambda1) || !std::isfinite(lambda2))
            throw std::domain_error("loss lambdas must be finite");
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw std::domain_error("loss lambdas must be non-negative");
    }

    friend bool operator==(const LossParams&, const LossParams&) = default;
};

/// Which piece of the piecewise loss produced a value.
enum class LossBranch { CorrectNonDefault, CorrectDefault, Misclassified, SigmaBoundary };

inline std::string_view to_string(LossBranch branch) {
    switch (branch) {
    case LossBranch::CorrectNonDefault: return "correct_non_default";
    case LossBranch::CorrectDefault: return "correct_default";
    case LossBranch::Misclassified: return "misclassified";
    case LossBranch::SigmaBoundary: return "sigma_boundary";
    }
    return "unknown";
}

struct LossValue {
    double value = 0.0;
    double subgradient_dy = 0.0;
    LossBranch branch = LossBranch::Misclassified;
};

/// Loss value with its derivative for the baseline families, which have no
/// branch structure worth reporting.
struct LossAndDerivative {
    double value = 0.0;
    double derivative = 0.0;
};

namespace detail {

inline void check_probability(double y) {
    if (!std::isfinite(y) || y < 0.0 || y > 1.0)
        throw std::domain_error("predicted probability must lie in [0, 1], got " + std::to_string(y));
}

inline void check_label(int label) {
    if (label != 0 && label != 1)
        throw std::domain_error("binary label must be 0 or 1, got " + std::to_string(label));
}

} // namespace detail

/// Hard label from a probability; the 0.5 threshold belongs to class 1.
inline int predict_label(double y) {
    detail::check_probability(y);
    return y >= 0.5 ? 1 : 0;
}

/// One instance: predicted probability, true label and the derived hard label.
struct PredictionRecord {
    double y = 0.0;
    int y_true = 0;
    int y_pred = 0;

    static PredictionRecord make(double y, int y_true) {
        detail::check_label(y_true);
        return {y, y_true, predict_label(y)};
    }
};

/// Distance penalty: 0 while |y - y_true| < 0.5, otherwise e^{-|y_true - y|} - 1.
inline double sigma(double y, int y_true) {
    detail::check_probability(y);
    detail::check_label(y_true);
    const double distance = std::abs(static_cast<double>(y_true) - y);
    if (distance < 0.5) return 0.0;
    return 1.0 / std::exp(distance) - 1.0;
}

struct IndicatorTerms {
    int non_default = 0; // y_true == y_pred == 0
    int default_class = 0; // y_true == y_pred == 1

    friend bool operator==(const IndicatorTerms&, const IndicatorTerms&) = default;
};

inline IndicatorTerms indicator_terms(int y_true, int y_pred) {
    detail::check_label(y_true);
    detail::check_label(y_pred);
    const bool correct = y_true == y_pred;
    return {correct && y_true == 0 ? 1 : 0, correct && y_true == 1 ? 1 : 0};
}

/// Extreme margin term: the active lambda times (2y - 1)^2 on correct
/// predictions, zero on misclassifications.
inline double gamma(double y, int y_true, const LossParams& params) {
    params.validate();
    const IndicatorTerms ind = indicator_terms(y_true, predict_label(y));
    const double gap = 2.0 * y - 1.0;
    const double margin = gap * gap;
    return ind.non_default * params.lambda1 * margin + ind.default_class * params.lambda2 * margin;
}

/// Xtreme Margin loss 1 / (1 + sigma + gamma) and the derivative of the
/// branch selected by the literal piece conditions. Values lie in (0, e].
///
/// At y = 0.5 with y_true = 1 the hard label is correct but the distance
/// condition still routes the instance to the sigma penalty; that piece is
/// reported as SigmaBoundary and evaluates to e^{0.5}.
inline LossValue xtreme_margin_loss(double y, int y_true, const LossParams& params) {
    const double s = sigma(y, y_true);
    const double g = gamma(y, y_true, params);
    const double distance = std::abs(static_cast<double>(y_true) - y);

    LossValue out;
    out.value = 1.0 / (1.0 + (s + g));

    if (distance >= 0.5) {
        // d/dy e^{|y_true - y|}; distance >= 0.5 so the sign is never zero.
        out.branch = predict_label(y) == y_true ? LossBranch::SigmaBoundary : LossBranch::Misclassified;
        const double direction = y > static_cast<double>(y_true) ? 1.0 : -1.0;
        out.subgradient_dy = std::exp(distance) * direction;
    } else {
        out.branch = y_true == 1 ? LossBranch::CorrectDefault : LossBranch::CorrectNonDefault;
        const double lambda = y_true == 1 ? params.lambda2 : params.lambda1;
        const double gap = 2.0 * y - 1.0;
        const double denom = 1.0 + lambda * gap * gap;
        out.subgradient_dy = -4.0 * lambda * gap / (denom * denom);
    }
    return out;
}

inline double xtreme_margin_subgrad(double y, int y_true, const LossParams& params) {
    return xtreme_margin_loss(y, y_true, params).subgradient_dy;
}

inline constexpr double kBceClip = 1e-7;

/// Binary cross-entropy on a probability clipped to [1e-7, 1 - 1e-7]. The
/// derivative is evaluated at the clipped point.
inline LossAndDerivative bce_loss(double y, int y_true) {
    detail::check_probability(y);
    detail::check_label(y_true);
    const double p = std::clamp(y, kBceClip, 1.0 - kBceClip);
    const double t = static_cast<double>(y_true);
    return {-(t * std::log(p) + (1.0 - t) * std::log(1.0 - p)), -t / p + (1.0 - t) / (1.0 - p)};
}

/// Hinge loss on the signed target t = 2*y_true - 1 and score s = 2y - 1.
inline LossAndDerivative hinge_loss(double y, int y_true) {
    detail::check_probability(y);
    detail::check_label(y_true);
    const double t = 2.0 * y_true - 1.0;
    const double s = 2.0 * y - 1.0;
    const double slack = 1.0 - t * s;
    if (slack <= 0.0) return {0.0, 0.0};
    return {slack, -2.0 * t};
}

/// Family dispatch used by training and metrics.
inline LossAndDerivative evaluate_loss(double y, int y_true, const LossParams& params) {
    switch (params.family) {
    case LossFamily::XtremeMargin: {
        const LossValue v = xtreme_margin_loss(y, y_true, params);
        return {v.value, v.subgradient_dy};
    }
    case LossFamily::BinaryCrossEntropy: return bce_loss(y, y_true);
    case LossFamily::Hinge: return hinge_loss(y, y_true);
    }
    throw std::logic_error("unhandled loss family");
}

struct BatchLoss {
    double mean = 0.0;
    std::vector<double> subgradients; // per-instance d(mean)/dy_i, already scaled by 1/n
};

/// Mean loss over a batch.
inline BatchLoss batch_loss(std::span<const PredictionRecord> records, const LossParams& params) {
    if (records.empty()) throw std::domain_error("batch_loss on an empty batch");
    const double scale = 1.0 / static_cast<double>(records.size());
    BatchLoss out;
    out.subgradients.reserve(records.size());
    double total = 0.0;
    for (const auto& r : records) {
        const LossAndDerivative v = evaluate_loss(r.y, r.y_true, params);
        total += v.value;
        out.subgradients.push_back(v.derivative * scale);
    }
    out.mean = total * scale;
    return out;
}

} // namespace xmargin

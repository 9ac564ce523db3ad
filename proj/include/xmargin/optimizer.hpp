#pragma once

// Parameter updates (negative subgradient method and RMSprop), the
// subgradient inequality check, and the minibatch training loop.

#include "data.hpp"
#include "loss.hpp"
#include "network.hpp"
#include "random.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmargin {

enum class OptimizerMethod { SubgradientDescent, RmsProp };

inline std::string_view to_string(OptimizerMethod m) {
    return m == OptimizerMethod::SubgradientDescent ? "subgradient" : "rmsprop";
}

inline OptimizerMethod parse_optimizer(std::string_view name) {
    if (name == "subgradient" || name == "sgd") return OptimizerMethod::SubgradientDescent;
    if (name == "rmsprop") return OptimizerMethod::RmsProp;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

struct OptimizerConfig {
    OptimizerMethod method = OptimizerMethod::RmsProp;
    double alpha = 0.001;
    double decay = 0.9;
    double epsilon_stab = 1e-8;
    bool track_best = false;

    /// Subgradient descent keeps the best iterate by default.
    static OptimizerConfig subgradient(double alpha) {
        return {OptimizerMethod::SubgradientDescent, alpha, 0.9, 1e-8, true};
    }
    static OptimizerConfig rmsprop(double alpha) { return {OptimizerMethod::RmsProp, alpha, 0.9, 1e-8, false}; }

    /// alpha = 0 is accepted so a run can be made a no-op.
    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be a finite value >= 0");
        if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("decay must lie in (0, 1)");
        if (!(epsilon_stab > 0.0)) throw std::invalid_argument("epsilon_stab must be positive");
    }
};

class OptimizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainState {
    MlpModel model;
    std::size_t step = 0;
    ParameterGradients accumulators; // RMSprop second moments
    double best_loss = std::numeric_limits<double>::infinity();
    std::optional<MlpModel> best_model;

    explicit TrainState(MlpModel m)
        : model(std::move(m)), accumulators(ParameterGradients::zeros_like(model)) {}

    /// Records the loss observed at the current parameters; keeps them if it
    /// is the lowest seen so far.
    void observe_loss(double loss) {
        if (loss < best_loss) {
            best_loss = loss;
            best_model = model;
        }
    }
};

namespace detail {

inline void check_step_input(const TrainState& state, const ParameterGradients& g) {
    if (!g.matches(state.model)) throw OptimizerError("gradient bundle shape does not match the model");
    if (!g.all_finite()) throw OptimizerError("non-finite subgradient; step rejected");
}

} // namespace detail

/// theta <- theta - alpha * g.
inline void subgradient_step(TrainState& state, const ParameterGradients& g, double alpha) {
    detail::check_step_input(state, g);
    for (std::size_t li = 0; li < state.model.layers.size(); ++li) {
        auto& layer = state.model.layers[li];
        const auto& gl = g.layers[li];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= alpha * gl.weights[i];
        if (layer.has_bias)
            for (std::size_t i = 0; i < layer.biases.size(); ++i) layer.biases[i] -= alpha * gl.biases[i];
    }
    ++state.step;
}

/// v <- decay*v + (1-decay)*g^2;  theta <- theta - alpha*g / (sqrt(v) + eps).
inline void rmsprop_step(TrainState& state, const ParameterGradients& g, const OptimizerConfig& config) {
    detail::check_step_input(state, g);
    const double keep = config.decay;
    const double mix = 1.0 - config.decay;
    auto update = [&](std::vector<double>& params, std::vector<double>& acc, const std::vector<double>& grad) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            acc[i] = keep * acc[i] + mix * grad[i] * grad[i];
            params[i] -= config.alpha * grad[i] / (std::sqrt(acc[i]) + config.epsilon_stab);
        }
    };
    for (std::size_t li = 0; li < state.model.layers.size(); ++li) {
        auto& layer = state.model.layers[li];
        auto& acc = state.accumulators.layers[li];
        update(layer.weights, acc.weights, g.layers[li].weights);
        if (layer.has_bias) update(layer.biases, acc.biases, g.layers[li].biases);
    }
    ++state.step;
}

inline void optimizer_step(TrainState& state, const ParameterGradients& g, const OptimizerConfig& config) {
    if (config.method == OptimizerMethod::SubgradientDescent)
        subgradient_step(state, g, config.alpha);
    else
        rmsprop_step(state, g, config);
}

struct SubgradientCheck {
    bool passed = true;
    double worst_slack = std::numeric_limits<double>::infinity(); // min over probes of f(p) - f(t0) - g.(p - t0)
    std::size_t worst_probe = 0;
};

inline constexpr double kSubgradientTolerance = 1e-9;

/// Checks f(theta) >= f(theta0) + g.(theta - theta0) at every probe, up to 1e-9.
inline SubgradientCheck verify_subgradient(const std::function<double(std::span<const double>)>& f,
                                           std::span<const double> theta0, std::span<const double> g,
                                           std::span<const std::vector<double>> probes) {
    if (probes.empty()) throw std::invalid_argument("verify_subgradient needs at least one probe");
    if (g.size() != theta0.size()) throw std::invalid_argument("subgradient and parameter point differ in length");
    const double f0 = f(theta0);
    if (!std::isfinite(f0)) throw std::domain_error("objective is non-finite at the base point");
    SubgradientCheck out;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const auto& theta = probes[p];
        if (theta.size() != theta0.size()) throw std::invalid_argument("probe differs in length from the base point");
        const double fp = f(theta);
        if (!std::isfinite(fp)) throw std::domain_error("objective is non-finite at probe " + std::to_string(p));
        double linear = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) linear += g[i] * (theta[i] - theta0[i]);
        const double slack = fp - (f0 + linear);
        if (slack < out.worst_slack) {
            out.worst_slack = slack;
            out.worst_probe = p;
        }
    }
    out.passed = out.worst_slack >= -kSubgradientTolerance;
    return out;
}

struct EpochRecord {
    std::size_t epoch = 0;   // 1-based
    double train_loss = 0.0; // mean minibatch loss over the epoch
    double train_acc = 0.0;  // inference-mode accuracy on the training data after the epoch
    std::optional<double> eval_acc;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochRecord> history;
    std::size_t steps = 0;
    std::optional<double> best_loss; // set when best-iterate tracking was on
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::vector<double> predict_all(const MlpModel& model, const Dataset& data) {
    std::vector<double> out(data.rows);
    Rng unused(0);
    ForwardTrace trace;
    for (std::size_t i = 0; i < data.rows; ++i) {
        forward_into(model, data.row(i), Mode::Infer, unused, trace);
        out[i] = trace.y;
    }
    return out;
}

inline std::vector<int> hard_labels(std::span<const double> probabilities) {
    std::vector<int> out(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = predict_label(probabilities[i]);
    return out;
}

inline double model_accuracy(const MlpModel& model, const Dataset& data) {
    const auto preds = hard_labels(predict_all(model, data));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.rows; ++i) hits += preds[i] == data.labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.rows);
}

/// Mean inference-mode loss over a dataset.
inline double dataset_loss(const MlpModel& model, const Dataset& data, const LossParams& loss) {
    const auto probs = predict_all(model, data);
    double total = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) total += evaluate_loss(probs[i], data.labels[i], loss).value;
    return total / static_cast<double>(data.rows);
}

struct TrainOptions {
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
};

/// Minibatch training. Each epoch reshuffles the rows with `rng`; every
/// batch runs Train-mode forward passes, the mean batch loss, the backward
/// pass and one optimizer step. With best-iterate tracking on, the
/// full-data inference loss is observed before training and after each
/// epoch and the best parameters are returned.
inline TrainResult train(MlpModel model, const Dataset& data, const LossParams& loss, const OptimizerConfig& config,
                         const TrainOptions& options, Rng& rng, const Dataset* eval = nullptr) {
    if (data.rows == 0) throw std::invalid_argument("training data is empty");
    if (options.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (options.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (data.cols != model.input_dim()) throw std::invalid_argument("training data width does not match the model");
    loss.validate();
    config.validate();
    model.validate();

    TrainState state(std::move(model));
    if (config.track_best) state.observe_loss(dataset_loss(state.model, data, loss));

    TrainResult result;
    std::vector<std::size_t> order(data.rows);
    std::iota(order.begin(), order.end(), 0);
    ParameterGradients grads = ParameterGradients::zeros_like(state.model);
    BackwardScratch scratch;
    ForwardTrace trace;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            grads.set_zero();
            double batch_total = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                forward_into(state.model, data.row(i), Mode::Train, rng, trace);
                const LossAndDerivative v = evaluate_loss(trace.y, data.labels[i], loss);
                batch_total += v.value;
                backward_accumulate(trace, state.model, v.derivative * scale, grads, scratch);
            }
            const double batch_mean = batch_total * scale;
            if (!std::isfinite(batch_mean) || !grads.all_finite())
                throw TrainingDiverged("non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batches + 1));
            optimizer_step(state, grads, config);
            epoch_loss += batch_mean;
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(batches);
        rec.train_acc = model_accuracy(state.model, data);
        if (eval != nullptr) rec.eval_acc = model_accuracy(state.model, *eval);
        if (config.track_best) state.observe_loss(dataset_loss(state.model, data, loss));
        result.history.push_back(rec);
    }

    result.steps = state.step;
    if (config.track_best) {
        result.best_loss = state.best_loss;
        result.model = std::move(*state.best_model);
    } else {
        result.model = std::move(state.model);
    }
    return result;
}

} // namespace xmargin

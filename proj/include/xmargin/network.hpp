#pragma once

// Small dense feedforward network with inverted dropout and reverse-mode
// gradients. The output layer is a single sigmoid unit, so the network
// output is the predicted probability of the default class.

#include "random.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmargin {

enum class Activation { ReLU, Sigmoid };

inline std::string_view to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "sigmoid";
}

inline Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights; // outputs x inputs, row-major
    std::vector<double> biases;  // outputs; kept at zero when !has_bias
    Activation activation = Activation::ReLU;
    double dropout_rate = 0.0; // applied after the activation in Train mode
    bool has_bias = true;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct LayerSpec {
    std::size_t width = 1;
    Activation activation = Activation::ReLU;
    double dropout_rate = 0.0;
    bool has_bias = true;
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    std::uint64_t init_seed = 0;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().inputs; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size() + (l.has_bias ? l.biases.size() : 0);
        return n;
    }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("model has no layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string where = "layer " + std::to_string(i) + ": ";
            if (l.inputs == 0 || l.outputs == 0) throw std::invalid_argument(where + "zero width");
            if (i > 0 && layers[i - 1].outputs != l.inputs)
                throw std::invalid_argument(where + "input width does not match previous layer");
            if (l.weights.size() != l.inputs * l.outputs || l.biases.size() != l.outputs)
                throw std::invalid_argument(where + "parameter storage has the wrong size");
            if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0))
                throw std::invalid_argument(where + "dropout rate must be in [0, 1)");
            for (double w : l.weights)
                if (!std::isfinite(w)) throw std::invalid_argument(where + "non-finite weight");
            for (double b : l.biases)
                if (!std::isfinite(b)) throw std::invalid_argument(where + "non-finite bias");
        }
        const auto& head = layers.back();
        if (head.outputs != 1 || head.activation != Activation::Sigmoid)
            throw std::invalid_argument("final layer must be a single sigmoid unit");
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Builds a model with uniform fan-in/fan-out scaled weights
/// (+-sqrt(6 / (fan_in + fan_out))) and zero biases.
inline MlpModel make_model(std::size_t input_dim, std::span<const LayerSpec> specs, std::uint64_t seed) {
    if (input_dim == 0) throw std::invalid_argument("input dimension must be at least 1");
    MlpModel model;
    model.init_seed = seed;
    Rng rng(seed);
    std::size_t fan_in = input_dim;
    for (const auto& spec : specs) {
        DenseLayer layer;
        layer.inputs = fan_in;
        layer.outputs = spec.width;
        layer.activation = spec.activation;
        layer.dropout_rate = spec.dropout_rate;
        layer.has_bias = spec.has_bias;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.width));
        layer.weights.resize(fan_in * spec.width);
        for (double& w : layer.weights) w = uniform(rng, -limit, limit);
        layer.biases.assign(spec.width, 0.0);
        model.layers.push_back(std::move(layer));
        fan_in = spec.width;
    }
    model.validate();
    return model;
}

/// The fixed experiment architecture:
/// 64 relu (+dropout .25), 32 sigmoid (+.25), 16 relu (+.25), 8 relu, 1 sigmoid.
inline MlpModel build_paper_model(std::size_t input_dim, std::uint64_t seed) {
    const LayerSpec specs[] = {
        {64, Activation::ReLU, 0.25},
        {32, Activation::Sigmoid, 0.25},
        {16, Activation::ReLU, 0.25},
        {8, Activation::ReLU, 0.0},
        {1, Activation::Sigmoid, 0.0},
    };
    return make_model(input_dim, specs, seed);
}

/// Shallow network used for two-feature decision boundaries: 8 relu, 4 relu, 1 sigmoid.
inline MlpModel build_boundary_model(std::size_t input_dim, std::uint64_t seed) {
    const LayerSpec specs[] = {
        {8, Activation::ReLU, 0.0},
        {4, Activation::ReLU, 0.0},
        {1, Activation::Sigmoid, 0.0},
    };
    return make_model(input_dim, specs, seed);
}

/// One sigmoid unit without bias: y = sigmoid(w . x).
inline MlpModel make_single_layer_model(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("single-layer model needs at least one weight");
    MlpModel model;
    DenseLayer layer;
    layer.inputs = weights.size();
    layer.outputs = 1;
    layer.weights.assign(weights.begin(), weights.end());
    layer.biases.assign(1, 0.0);
    layer.activation = Activation::Sigmoid;
    layer.has_bias = false;
    model.layers.push_back(std::move(layer));
    model.validate();
    return model;
}

inline double forward_single_layer(std::span<const double> weights, std::span<const double> x) {
    if (weights.size() != x.size())
        throw std::domain_error("weight and feature vectors differ in length");
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
    return sigmoid(z);
}

enum class Mode { Train, Infer };

struct LayerTrace {
    std::vector<double> pre;        // affine output
    std::vector<double> activation; // activation(pre), before dropout
    std::vector<double> mask;       // dropout scale per unit: 0 or 1/(1-rate); all ones in Infer
    std::vector<double> output;     // activation * mask, fed to the next layer
};

struct ForwardTrace {
    std::vector<double> input;
    std::vector<LayerTrace> layers;
    double y = 0.0;
};

/// Forward pass reusing the buffers of `trace`.
inline void forward_into(const MlpModel& model, std::span<const double> x, Mode mode, Rng& rng,
                         ForwardTrace& trace) {
    if (x.size() != model.input_dim())
        throw std::domain_error("input has " + std::to_string(x.size()) + " features, model expects " +
                                std::to_string(model.input_dim()));
    for (double v : x)
        if (!std::isfinite(v)) throw std::domain_error("non-finite input feature");

    trace.input.assign(x.begin(), x.end());
    trace.layers.resize(model.layers.size());
    std::span<const double> in = trace.input;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const DenseLayer& layer = model.layers[li];
        LayerTrace& lt = trace.layers[li];
        lt.pre.resize(layer.outputs);
        lt.activation.resize(layer.outputs);
        lt.mask.assign(layer.outputs, 1.0);
        lt.output.resize(layer.outputs);

        const bool drop = mode == Mode::Train && layer.dropout_rate > 0.0;
        const double keep_scale = drop ? 1.0 / (1.0 - layer.dropout_rate) : 1.0;
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double* row = layer.weights.data() + o * layer.inputs;
            double z = layer.biases[o];
            for (std::size_t i = 0; i < layer.inputs; ++i) z += row[i] * in[i];
            lt.pre[o] = z;
            const double a = layer.activation == Activation::ReLU ? (z > 0.0 ? z : 0.0) : sigmoid(z);
            lt.activation[o] = a;
            if (drop) lt.mask[o] = uniform01(rng) < layer.dropout_rate ? 0.0 : keep_scale;
            lt.output[o] = a * lt.mask[o];
        }
        in = lt.output;
    }
    trace.y = trace.layers.back().output.front();
}

inline ForwardTrace forward(const MlpModel& model, std::span<const double> x, Mode mode, Rng& rng) {
    ForwardTrace trace;
    forward_into(model, x, mode, rng, trace);
    return trace;
}

/// Deterministic inference.
inline double predict_probability(const MlpModel& model, std::span<const double> x) {
    Rng unused(0);
    ForwardTrace trace;
    forward_into(model, x, Mode::Infer, unused, trace);
    return trace.y;
}

struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Gradient bundle shaped like the model's parameters.
struct ParameterGradients {
    std::vector<LayerGradient> layers;

    static ParameterGradients zeros_like(const MlpModel& model) {
        ParameterGradients g;
        g.layers.reserve(model.layers.size());
        for (const auto& l : model.layers)
            g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.biases.size(), 0.0)});
        return g;
    }

    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.weights.begin(), l.weights.end(), 0.0);
            std::fill(l.biases.begin(), l.biases.end(), 0.0);
        }
    }

    bool all_finite() const {
        for (const auto& l : layers) {
            for (double v : l.weights)
                if (!std::isfinite(v)) return false;
            for (double v : l.biases)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool matches(const MlpModel& model) const {
        if (layers.size() != model.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].weights.size() != model.layers[i].weights.size() ||
                layers[i].biases.size() != model.layers[i].biases.size())
                return false;
        return true;
    }
};

struct BackwardScratch {
    std::vector<double> delta;
    std::vector<double> upstream;
};

/// Adds d(loss)/d(parameters) for one traced instance into `grads`, given
/// d(loss)/dy. Gradients flow through the same dropout masks as the
/// forward pass; relu uses subderivative 0 at 0.
inline void backward_accumulate(const ForwardTrace& trace, const MlpModel& model, double dloss_dy,
                                ParameterGradients& grads, BackwardScratch& scratch) {
    if (trace.layers.size() != model.layers.size() || trace.input.size() != model.input_dim())
        throw std::domain_error("forward trace does not belong to this model");
    for (std::size_t li = 0; li < model.layers.size(); ++li)
        if (trace.layers[li].pre.size() != model.layers[li].outputs)
            throw std::domain_error("forward trace does not belong to this model");
    if (!grads.matches(model)) throw std::domain_error("gradient bundle does not match the model");

    scratch.upstream.assign(1, dloss_dy);
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const DenseLayer& layer = model.layers[li];
        const LayerTrace& lt = trace.layers[li];
        std::span<const double> in =
            li == 0 ? std::span<const double>(trace.input) : std::span<const double>(trace.layers[li - 1].output);

        scratch.delta.resize(layer.outputs);
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double local = layer.activation == Activation::ReLU
                                     ? (lt.pre[o] > 0.0 ? 1.0 : 0.0)
                                     : lt.activation[o] * (1.0 - lt.activation[o]);
            scratch.delta[o] = scratch.upstream[o] * lt.mask[o] * local;
        }

        LayerGradient& g = grads.layers[li];
        const bool propagate = li > 0;
        if (propagate) scratch.upstream.assign(layer.inputs, 0.0);
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double d = scratch.delta[o];
            if (d == 0.0) continue;
            const double* row = layer.weights.data() + o * layer.inputs;
            double* grow = g.weights.data() + o * layer.inputs;
            for (std::size_t i = 0; i < layer.inputs; ++i) grow[i] += d * in[i];
            if (layer.has_bias) g.biases[o] += d;
            if (propagate)
                for (std::size_t i = 0; i < layer.inputs; ++i) scratch.upstream[i] += row[i] * d;
        }
    }
}

inline ParameterGradients backward(const ForwardTrace& trace, const MlpModel& model, double dloss_dy) {
    ParameterGradients grads = ParameterGradients::zeros_like(model);
    BackwardScratch scratch;
    backward_accumulate(trace, model, dloss_dy, grads, scratch);
    return grads;
}

/// Parameters in a fixed order: per layer, row-major weights then biases
/// (biases only for layers that have them).
inline std::vector<double> flatten_parameters(const MlpModel& model) {
    std::vector<double> out;
    out.reserve(model.parameter_count());
    for (const auto& l : model.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        if (l.has_bias) out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
}

inline void assign_parameters(MlpModel& model, std::span<const double> values) {
    if (values.size() != model.parameter_count())
        throw std::invalid_argument("parameter vector has the wrong length");
    std::size_t k = 0;
    for (auto& l : model.layers) {
        for (double& w : l.weights) w = values[k++];
        if (l.has_bias)
            for (double& b : l.biases) b = values[k++];
    }
}

inline std::vector<double> flatten_gradients(const ParameterGradients& grads, const MlpModel& model) {
    if (!grads.matches(model)) throw std::domain_error("gradient bundle does not match the model");
    std::vector<double> out;
    out.reserve(model.parameter_count());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& g = grads.layers[i];
        out.insert(out.end(), g.weights.begin(), g.weights.end());
        if (model.layers[i].has_bias) out.insert(out.end(), g.biases.begin(), g.biases.end());
    }
    return out;
}

// Checkpoint format (text, version 1):
//
//   xmargin-model 1
//   input_dim <n> layers <L> init_seed <seed>
//   layer <i> inputs <in> outputs <out> activation <relu|sigmoid> dropout <rate> bias <0|1>
//   weights <out*in values, row-major>
//   biases <out values>
//   ...
//
// Values are written with 17 significant digits so a save/load round trip
// reproduces every parameter bit for bit.

inline void save_model(std::ostream& os, const MlpModel& model) {
    model.validate();
    auto put = [&os](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    };
    os << "xmargin-model 1\n";
    os << "input_dim " << model.input_dim() << " layers " << model.layers.size() << " init_seed "
       << model.init_seed << '\n';
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& l = model.layers[i];
        os << "layer " << i << " inputs " << l.inputs << " outputs " << l.outputs << " activation "
           << to_string(l.activation) << " dropout ";
        put(l.dropout_rate);
        os << " bias " << (l.has_bias ? 1 : 0) << '\n';
        os << "weights";
        for (double w : l.weights) put(w);
        os << "\nbiases";
        for (double b : l.biases) put(b);
        os << '\n';
    }
}

inline MlpModel load_model(std::istream& is) {
    auto fail = [](const std::string& what) -> MlpModel { throw std::runtime_error("model checkpoint: " + what); };
    auto expect = [&](std::string_view word) {
        std::string token;
        if (!(is >> token) || token != word) fail("expected '" + std::string(word) + "'");
    };
    int version = 0;
    expect("xmargin-model");
    if (!(is >> version) || version != 1) return fail("unsupported version");
    std::size_t input_dim = 0, count = 0;
    MlpModel model;
    expect("input_dim");
    is >> input_dim;
    expect("layers");
    is >> count;
    expect("init_seed");
    is >> model.init_seed;
    if (!is) return fail("malformed header");
    for (std::size_t i = 0; i < count; ++i) {
        DenseLayer l;
        std::size_t index = 0;
        std::string activation;
        int bias = 0;
        expect("layer");
        is >> index;
        expect("inputs");
        is >> l.inputs;
        expect("outputs");
        is >> l.outputs;
        expect("activation");
        is >> activation;
        expect("dropout");
        is >> l.dropout_rate;
        expect("bias");
        is >> bias;
        if (!is || index != i) return fail("malformed layer header " + std::to_string(i));
        l.activation = parse_activation(activation);
        l.has_bias = bias != 0;
        l.weights.resize(l.inputs * l.outputs);
        l.biases.resize(l.outputs);
        expect("weights");
        for (double& w : l.weights) is >> w;
        expect("biases");
        for (double& b : l.biases) is >> b;
        if (!is) return fail("truncated parameters in layer " + std::to_string(i));
        model.layers.push_back(std::move(l));
    }
    if (model.input_dim() != input_dim) return fail("input dimension mismatch");
    model.validate();
    return model;
}

} // namespace xmargin

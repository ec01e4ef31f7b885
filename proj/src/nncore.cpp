#include "sddnn/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sddnn/error.hpp"

namespace sddnn {

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::tanh:
            return std::tanh(z);
        case Activation::sigmoid:
            // Kept inside the open interval even where the exact value rounds to 0 or 1.
            return std::clamp(1.0 / (1.0 + std::exp(-z)), std::numeric_limits<double>::min(),
                              std::nextafter(1.0, 0.0));
        case Activation::linear:
            return z;
    }
    return z;
}

// Derivative expressed through the activation output.
double activate_derivative(Activation a, double y) {
    switch (a) {
        case Activation::tanh:
            return 1.0 - y * y;
        case Activation::sigmoid:
            return y * (1.0 - y);
        case Activation::linear:
            return 1.0;
    }
    return 1.0;
}

LayerGradient* find_entry(Gradients& grads, std::size_t layer) {
    for (auto& g : grads) {
        if (g.layer == layer) return &g;
    }
    return nullptr;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh:
            return "tanh";
        case Activation::sigmoid:
            return "sigmoid";
        case Activation::linear:
            return "linear";
    }
    return "linear";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "linear") return Activation::linear;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void Layer::validate() const {
    if (shape.input_dim == 0 || shape.output_dim == 0) throw ConfigError("layer dimensions must be >= 1");
    if (weights.size() != shape.input_dim * shape.output_dim || biases.size() != shape.output_dim) {
        throw ConfigError("layer parameter storage does not match its shape");
    }
}

std::size_t parameter_count(std::span<const Layer> layers) {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
}

std::size_t trainable_parameter_count(std::span<const Layer> layers) {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.trainable) n += l.parameter_count();
    }
    return n;
}

void validate_chain(std::span<const Layer> layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].validate();
        if (i + 1 < layers.size() && layers[i].shape.output_dim != layers[i + 1].shape.input_dim) {
            throw ConfigError("layer " + std::to_string(i) + " output_dim " +
                              std::to_string(layers[i].shape.output_dim) + " does not match layer " +
                              std::to_string(i + 1) + " input_dim " + std::to_string(layers[i + 1].shape.input_dim));
        }
    }
}

std::vector<double> Network::select_inputs(std::span<const double> frame) const {
    if (feature_indices.empty()) return {frame.begin(), frame.end()};
    std::vector<double> out(feature_indices.size());
    for (std::size_t i = 0; i < feature_indices.size(); ++i) {
        if (feature_indices[i] >= frame.size()) throw InputError("frame shorter than the network's feature indices");
        out[i] = frame[feature_indices[i]];
    }
    return out;
}

Network init_params(std::span<const LayerShape> shapes, std::uint64_t seed) {
    if (shapes.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (shapes[i].input_dim == 0 || shapes[i].output_dim == 0) throw ConfigError("layer dimensions must be >= 1");
        if (i + 1 < shapes.size() && shapes[i].output_dim != shapes[i + 1].input_dim) {
            throw ConfigError("layer shapes do not chain at layer " + std::to_string(i));
        }
    }
    Rng rng(seed);
    Network net;
    net.layers.reserve(shapes.size());
    for (const auto& s : shapes) {
        Layer layer;
        layer.shape = s;
        layer.weights.resize(s.input_dim * s.output_dim);
        layer.biases.assign(s.output_dim, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
        for (auto& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * limit;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void forward_into(std::span<const Layer> layers, std::span<const double> input, ForwardPass& pass) {
    if (layers.empty()) throw ConfigError("cannot run an empty network");
    if (input.size() != layers.front().shape.input_dim) {
        throw InputError("input length " + std::to_string(input.size()) + " does not match input_dim " +
                         std::to_string(layers.front().shape.input_dim));
    }
    pass.activations.resize(layers.size() + 1);
    pass.activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        const std::size_t in_dim = layer.shape.input_dim;
        const std::vector<double>& x = pass.activations[l];
        if (x.size() != in_dim) throw ConfigError("layer " + std::to_string(l) + " input does not chain");
        std::vector<double>& y = pass.activations[l + 1];
        y.resize(layer.shape.output_dim);
        for (std::size_t r = 0; r < layer.shape.output_dim; ++r) {
            const double* w = layer.weights.data() + r * in_dim;
            double z = layer.biases[r];
            for (std::size_t c = 0; c < in_dim; ++c) z += w[c] * x[c];
            y[r] = activate(layer.shape.activation, z);
        }
    }
}

ForwardPass forward(const Network& net, std::span<const double> input) {
    ForwardPass pass;
    forward_into(net.layers, input, pass);
    return pass;
}

double score(const Network& net, std::span<const double> frame) {
    ForwardPass pass;
    if (net.feature_indices.empty()) {
        forward_into(net.layers, frame, pass);
    } else {
        const auto x = net.select_inputs(frame);
        forward_into(net.layers, x, pass);
    }
    return pass.output()[0];
}

double mse_loss(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw InputError("mse_loss needs equal, non-empty lengths");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
}

std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw InputError("mse_gradient needs equal, non-empty lengths");
    }
    std::vector<double> g(prediction.size());
    const double n = static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (prediction[i] - target[i]) / n;
    return g;
}

Gradients zero_gradients(std::span<const Layer> layers) {
    Gradients grads;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].trainable) continue;
        grads.push_back({i, std::vector<double>(layers[i].weights.size(), 0.0),
                         std::vector<double>(layers[i].biases.size(), 0.0)});
    }
    return grads;
}

void backpropagate(std::span<const Layer> layers, std::size_t layer_offset, const ForwardPass& pass,
                   std::span<const double> output_grad, double scale, Gradients& accum,
                   std::vector<double>* input_grad) {
    if (pass.activations.size() != layers.size() + 1) {
        throw InternalError("activations were not produced by this network");
    }
    if (output_grad.size() != layers.back().shape.output_dim) throw InternalError("output gradient size mismatch");

    // Lowest layer whose gradient or input gradient is still needed.
    std::size_t lowest = layers.size();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].trainable) {
            lowest = l;
            break;
        }
    }
    if (input_grad != nullptr) lowest = 0;
    if (lowest == layers.size()) return;

    std::vector<double> upstream(output_grad.begin(), output_grad.end());
    std::vector<double> delta;
    for (std::size_t l = layers.size(); l-- > lowest;) {
        const Layer& layer = layers[l];
        const std::vector<double>& x = pass.activations[l];
        const std::vector<double>& y = pass.activations[l + 1];
        if (x.size() != layer.shape.input_dim || y.size() != layer.shape.output_dim) {
            throw InternalError("stale activations: dimension mismatch at layer " + std::to_string(l));
        }
        const std::size_t in_dim = layer.shape.input_dim;
        delta.resize(y.size());
        for (std::size_t r = 0; r < y.size(); ++r) delta[r] = upstream[r] * activate_derivative(layer.shape.activation, y[r]);

        if (layer.trainable) {
            LayerGradient* g = find_entry(accum, layer_offset + l);
            if (g == nullptr || g->weights.size() != layer.weights.size() || g->biases.size() != layer.biases.size()) {
                throw InternalError("gradient buffer missing or misaligned for layer " + std::to_string(layer_offset + l));
            }
            for (std::size_t r = 0; r < y.size(); ++r) {
                const double d = scale * delta[r];
                g->biases[r] += d;
                if (d == 0.0) continue;
                double* gw = g->weights.data() + r * in_dim;
                for (std::size_t c = 0; c < in_dim; ++c) gw[c] += d * x[c];
            }
        }

        if (l == lowest && (l > 0 || input_grad == nullptr)) break;
        upstream.assign(in_dim, 0.0);
        for (std::size_t r = 0; r < y.size(); ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* w = layer.weights.data() + r * in_dim;
            for (std::size_t c = 0; c < in_dim; ++c) upstream[c] += w[c] * d;
        }
    }
    if (input_grad != nullptr) *input_grad = std::move(upstream);
}

Gradients backward(const Network& net, const ForwardPass& pass, std::span<const double> target) {
    Gradients grads = zero_gradients(net.layers);
    if (grads.empty()) return grads;
    if (pass.activations.size() != net.layers.size() + 1) throw InternalError("activations were not produced by this network");
    const auto g = mse_gradient(pass.output(), target);
    backpropagate(net.layers, 0, pass, g, 1.0, grads, nullptr);
    return grads;
}

OptimizerState make_optimizer(std::span<const Layer> layers, double learning_rate, double epsilon) {
    if (!(learning_rate >= 0.0) || !(epsilon >= 0.0)) throw ConfigError("learning rate and epsilon must be >= 0");
    return {learning_rate, epsilon, zero_gradients(layers)};
}

void adagrad_step(std::span<Layer> layers, const Gradients& gradients, OptimizerState& state) {
    auto update = [&](std::vector<double>& params, const std::vector<double>& grad, std::vector<double>& acc) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i];
            if (g == 0.0) continue;
            acc[i] += g * g;
            params[i] -= state.learning_rate * g / (std::sqrt(acc[i]) + state.epsilon);
        }
    };
    for (const auto& g : gradients) {
        if (g.layer >= layers.size()) throw InternalError("gradient refers to a missing layer");
        Layer& layer = layers[g.layer];
        if (!layer.trainable) throw InternalError("gradient supplied for frozen layer " + std::to_string(g.layer));
        if (g.weights.size() != layer.weights.size() || g.biases.size() != layer.biases.size()) {
            throw InternalError("gradient misaligned with layer " + std::to_string(g.layer));
        }
        LayerGradient* acc = find_entry(state.accumulators, g.layer);
        if (acc == nullptr) {
            state.accumulators.push_back({g.layer, std::vector<double>(layer.weights.size(), 0.0),
                                          std::vector<double>(layer.biases.size(), 0.0)});
            acc = &state.accumulators.back();
        }
        if (acc->weights.size() != layer.weights.size() || acc->biases.size() != layer.biases.size()) {
            throw InternalError("optimizer state misaligned with layer " + std::to_string(g.layer));
        }
        update(layer.weights, g.weights, acc->weights);
        update(layer.biases, g.biases, acc->biases);
    }
}

std::vector<double> apply_input_dropout(std::span<const double> input, const DropoutSpec& spec, Rng& rng) {
    if (!(spec.rate >= 0.0) || spec.rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    std::vector<double> out(input.begin(), input.end());
    if (spec.rate == 0.0) return out;
    const double keep_scale = 1.0 / (1.0 - spec.rate);
    for (auto& v : out) v = uniform01(rng) < spec.rate ? 0.0 : v * keep_scale;
    return out;
}

GradCheckReport grad_check(const Network& net, std::span<const double> input, std::span<const double> target,
                           double fd_step) {
    GradCheckReport report;
    const Gradients analytic = backward(net, forward(net, input), target);
    Network probe = net;
    auto loss_at = [&]() { return mse_loss(forward(probe, input).output(), target); };
    auto check = [&](double& param, double g) {
        const double saved = param;
        param = saved + fd_step;
        const double up = loss_at();
        param = saved - fd_step;
        const double down = loss_at();
        param = saved;
        const double numeric = (up - down) / (2.0 * fd_step);
        const double rel = std::abs(g - numeric) / std::max(std::abs(g), 1e-8);
        report.max_relative_error = std::max(report.max_relative_error, rel);
        ++report.compared;
    };
    for (const auto& g : analytic) {
        Layer& layer = probe.layers[g.layer];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) check(layer.weights[i], g.weights[i]);
        for (std::size_t i = 0; i < layer.biases.size(); ++i) check(layer.biases[i], g.biases[i]);
    }
    return report;
}

}  // namespace sddnn

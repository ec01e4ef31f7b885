#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sddnn {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class Activation { tanh, sigmoid, linear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct LayerShape {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::tanh;

    bool operator==(const LayerShape&) const = default;
};

/// One affine layer followed by an elementwise activation.
/// Weights are row-major, output_dim x input_dim.
struct Layer {
    LayerShape shape;
    std::vector<double> weights;
    std::vector<double> biases;
    bool trainable = true;

    double weight(std::size_t row, std::size_t col) const { return weights[row * shape.input_dim + col]; }
    double& weight(std::size_t row, std::size_t col) { return weights[row * shape.input_dim + col]; }
    std::size_t parameter_count() const { return weights.size() + biases.size(); }

    /// Throws ConfigError when weight/bias storage disagrees with the shape.
    void validate() const;
};

std::size_t parameter_count(std::span<const Layer> layers);
std::size_t trainable_parameter_count(std::span<const Layer> layers);
/// Throws ConfigError unless layer i's output_dim equals layer i+1's input_dim.
void validate_chain(std::span<const Layer> layers);

/// Feed-forward stack. `feature_indices` selects the frame columns fed to the
/// first layer; empty means the frame is passed through unchanged.
struct Network {
    std::vector<Layer> layers;
    std::vector<std::size_t> feature_indices;
    bool trained = false;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().shape.input_dim; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().shape.output_dim; }
    std::size_t parameter_count() const { return sddnn::parameter_count(layers); }
    std::size_t trainable_parameter_count() const { return sddnn::trainable_parameter_count(layers); }

    /// Picks this network's input slice out of a full frame vector.
    std::vector<double> select_inputs(std::span<const double> frame) const;
};

Network init_params(std::span<const LayerShape> shapes, std::uint64_t seed);

/// activations[0] is the input; activations[i + 1] is the output of layer i.
struct ForwardPass {
    std::vector<std::vector<double>> activations;

    std::span<const double> output() const { return activations.back(); }
};

void forward_into(std::span<const Layer> layers, std::span<const double> input, ForwardPass& pass);
ForwardPass forward(const Network& net, std::span<const double> input);

/// Runs the network on a full frame (applies the feature-index selection) and
/// returns the first output unit.
double score(const Network& net, std::span<const double> frame);

double mse_loss(std::span<const double> prediction, std::span<const double> target);

struct LayerGradient {
    std::size_t layer = 0;
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Gradient entries exist only for trainable layers, in layer order.
using Gradients = std::vector<LayerGradient>;

/// Zeroed gradient buffers for every trainable layer of `layers`.
Gradients zero_gradients(std::span<const Layer> layers);

/// Backpropagates an output-side gradient through `layers`, adding
/// scale * dL/dtheta into `accum`. `layer_offset` is the index of layers[0]
/// in the owning model (used to match `accum` entries). When `input_grad`
/// is non-null it receives dL/dinput.
void backpropagate(std::span<const Layer> layers, std::size_t layer_offset, const ForwardPass& pass,
                   std::span<const double> output_grad, double scale, Gradients& accum,
                   std::vector<double>* input_grad);

/// dL/dprediction for the MSE objective.
std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target);

Gradients backward(const Network& net, const ForwardPass& pass, std::span<const double> target);

struct OptimizerState {
    double learning_rate = 0.05;
    double epsilon = 1e-8;
    /// Squared-gradient accumulators, shaped like the trainable layers' gradients.
    Gradients accumulators;
};

OptimizerState make_optimizer(std::span<const Layer> layers, double learning_rate, double epsilon);

/// AdaGrad update of the trainable layers: acc += g^2, p -= lr * g / (sqrt(acc) + eps).
void adagrad_step(std::span<Layer> layers, const Gradients& gradients, OptimizerState& state);

struct DropoutSpec {
    double rate = 0.0;
};

/// Inverted dropout: zero each component with probability `rate`, scale survivors by 1/(1-rate).
std::vector<double> apply_input_dropout(std::span<const double> input, const DropoutSpec& spec, Rng& rng);

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t compared = 0;

    bool vacuous() const { return compared == 0; }
};

/// Compares backprop gradients against central differences (L(p+h) - L(p-h)) / 2h
/// over every trainable parameter. Relative error uses max(|g|, 1e-8) as denominator.
GradCheckReport grad_check(const Network& net, std::span<const double> input, std::span<const double> target,
                           double fd_step);

}  // namespace sddnn

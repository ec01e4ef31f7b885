#include "sddnn/arch.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "sddnn/error.hpp"

namespace sddnn {

void SubnetAssignment::validate() const {
    std::vector<int> seen(feature_dim, 0);
    for (const auto& g : groups) {
        if (g.feature_indices.empty()) throw ConfigError("feature group '" + g.name + "' is empty");
        for (std::size_t idx : g.feature_indices) {
            if (idx >= feature_dim) throw ConfigError("feature group '" + g.name + "' indexes past the frame width");
            if (seen[idx]++) throw ConfigError("feature column " + std::to_string(idx) + " belongs to two groups");
        }
    }
    for (std::size_t i = 0; i < feature_dim; ++i) {
        if (!seen[i]) throw ConfigError("feature column " + std::to_string(i) + " is not assigned to any group");
    }
}

SubnetAssignment partition_features(PartitionMode mode, const LldLayout& layout, std::size_t num_groups,
                                    std::uint64_t seed) {
    SubnetAssignment out;
    out.feature_dim = layout.frame_dim();
    if (out.feature_dim == 0) throw ConfigError("feature layout is empty");

    if (mode == PartitionMode::knowledge) {
        out.groups = {{"pitch", {}}, {"mfcc", {}}, {"mfb", {}}, {"intensity", {}}, {"jitter_shimmer", {}}};
        for (std::size_t col = 0; col < out.feature_dim; ++col) {
            const auto family = layout.frame_column_family(col);
            if (!family) {
                throw ConfigError("LLD column '" + layout.names[col / kFunctionalsPerLld] +
                                  "' has no family label; knowledge split impossible");
            }
            std::size_t g = 0;
            switch (*family) {
                case LldFamily::pitch:
                    g = 0;
                    break;
                case LldFamily::mfcc:
                    g = 1;
                    break;
                case LldFamily::mfb:
                    g = 2;
                    break;
                case LldFamily::intensity:
                    g = 3;
                    break;
                case LldFamily::jitter:
                case LldFamily::shimmer:
                    g = 4;
                    break;
            }
            out.groups[g].feature_indices.push_back(col);
        }
        out.validate();
        return out;
    }

    return random_partition(out.feature_dim, num_groups, seed);
}

SubnetAssignment random_partition(std::size_t feature_dim, std::size_t num_groups, std::uint64_t seed) {
    SubnetAssignment out;
    out.feature_dim = feature_dim;
    if (num_groups == 0 || num_groups > feature_dim) throw ConfigError("random split needs 1..D groups");
    std::vector<std::size_t> cols(feature_dim);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = cols.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(cols[i], cols[j]);
    }
    const std::size_t base = feature_dim / num_groups;
    const std::size_t extra = feature_dim % num_groups;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < num_groups; ++g) {
        const std::size_t n = base + (g < extra ? 1 : 0);
        FeatureGroup group{"subset_" + std::to_string(g), {cols.begin() + pos, cols.begin() + pos + n}};
        std::sort(group.feature_indices.begin(), group.feature_indices.end());
        out.groups.push_back(std::move(group));
        pos += n;
    }
    return out;
}

Network build_subnet(std::span<const std::size_t> group, std::size_t hidden_width, std::uint64_t seed) {
    if (group.empty()) throw ConfigError("subnet feature group is empty");
    if (hidden_width == 0) throw ConfigError("subnet hidden width must be >= 1");
    const LayerShape shapes[] = {{group.size(), hidden_width, Activation::tanh}, {hidden_width, 1, Activation::sigmoid}};
    Network net = init_params(shapes, seed);
    net.feature_indices.assign(group.begin(), group.end());
    return net;
}

std::size_t Composite::concat_width() const {
    std::size_t w = 0;
    for (const auto& b : branches()) w += b.shape.output_dim;
    return w;
}

void Composite::validate() const {
    if (groups.empty() || layers.size() <= groups.size()) throw ConfigError("composite needs branches and a fusion stack");
    for (std::size_t j = 0; j < groups.size(); ++j) {
        layers[j].validate();
        if (layers[j].shape.input_dim != groups[j].feature_indices.size()) {
            throw ConfigError("branch " + std::to_string(j) + " input width does not match its feature group");
        }
        for (std::size_t idx : groups[j].feature_indices) {
            if (idx >= input_dim) throw ConfigError("branch feature index past the composite input width");
        }
    }
    validate_chain(fusion());
    if (fusion().front().shape.input_dim != concat_width()) {
        throw ConfigError("fusion input width does not equal the summed branch widths");
    }
    if (fusion().back().shape.output_dim != 1) throw ConfigError("composite must end in one output unit");
}

void forward_into(const Composite& c, std::span<const double> frame, CompositePass& pass) {
    if (frame.size() != c.input_dim) {
        throw InputError("frame length " + std::to_string(frame.size()) + " does not match composite input " +
                         std::to_string(c.input_dim));
    }
    const std::size_t k = c.branch_count();
    pass.branches.resize(k);
    std::vector<double> concat;
    concat.reserve(c.concat_width());
    std::vector<double> slice;
    for (std::size_t j = 0; j < k; ++j) {
        const auto& idx = c.groups[j].feature_indices;
        slice.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) slice[i] = frame[idx[i]];
        forward_into(std::span<const Layer>(&c.layers[j], 1), slice, pass.branches[j]);
        const auto& h = pass.branches[j].activations[1];
        concat.insert(concat.end(), h.begin(), h.end());
    }
    forward_into(c.fusion(), concat, pass.fusion);
}

std::vector<double> branch_hiddens(const Composite& c, std::span<const double> frame) {
    if (frame.size() != c.input_dim) throw InputError("frame length does not match composite input");
    std::vector<double> concat;
    concat.reserve(c.concat_width());
    ForwardPass pass;
    std::vector<double> slice;
    for (std::size_t j = 0; j < c.branch_count(); ++j) {
        const auto& idx = c.groups[j].feature_indices;
        slice.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) slice[i] = frame[idx[i]];
        forward_into(std::span<const Layer>(&c.layers[j], 1), slice, pass);
        concat.insert(concat.end(), pass.activations[1].begin(), pass.activations[1].end());
    }
    return concat;
}

CompositePass forward(const Composite& c, std::span<const double> frame) {
    CompositePass pass;
    forward_into(c, frame, pass);
    return pass;
}

double score(const Composite& c, std::span<const double> frame) { return forward(c, frame).output()[0]; }

void backpropagate(const Composite& c, const CompositePass& pass, std::span<const double> target, double scale,
                   Gradients& accum) {
    if (pass.branches.size() != c.branch_count()) throw InternalError("composite pass does not match the model");
    const auto out_grad = mse_gradient(pass.output(), target);
    const bool any_branch_trainable =
        std::any_of(c.branches().begin(), c.branches().end(), [](const Layer& l) { return l.trainable; });
    std::vector<double> concat_grad;
    backpropagate(c.fusion(), c.branch_count(), pass.fusion, out_grad, scale, accum,
                  any_branch_trainable ? &concat_grad : nullptr);
    if (!any_branch_trainable) return;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < c.branch_count(); ++j) {
        const Layer& layer = c.layers[j];
        const std::size_t width = layer.shape.output_dim;
        if (layer.trainable) {
            backpropagate(std::span<const Layer>(&layer, 1), j, pass.branches[j],
                          std::span<const double>(concat_grad).subspan(offset, width), scale, accum, nullptr);
        }
        offset += width;
    }
}

Gradients backward(const Composite& c, const CompositePass& pass, std::span<const double> target) {
    Gradients grads = zero_gradients(c.layers);
    if (!grads.empty()) backpropagate(c, pass, target, 1.0, grads);
    return grads;
}

Composite compose_sd(std::span<const Network> subnets, std::span<const std::size_t> fusion_hidden,
                     std::size_t input_dim, std::uint64_t seed) {
    if (subnets.empty()) throw ConfigError("composition needs at least one subnet");
    Composite c;
    c.input_dim = input_dim;
    for (std::size_t j = 0; j < subnets.size(); ++j) {
        const Network& s = subnets[j];
        if (!s.trained) throw ConfigError("subnet " + std::to_string(j) + " has not been trained");
        if (s.layers.size() != 2 || s.feature_indices.empty()) {
            throw ConfigError("subnet " + std::to_string(j) + " must be a one-hidden-layer net over a feature group");
        }
        Layer base = s.layers.front();
        base.trainable = false;
        c.groups.push_back({"branch_" + std::to_string(j), s.feature_indices});
        c.layers.push_back(std::move(base));
    }
    std::vector<LayerShape> shapes;
    std::size_t width = c.concat_width();
    for (std::size_t h : fusion_hidden) {
        shapes.push_back({width, h, Activation::tanh});
        width = h;
    }
    shapes.push_back({width, 1, Activation::sigmoid});
    Network fusion = init_params(shapes, seed);
    for (auto& l : fusion.layers) c.layers.push_back(std::move(l));

    std::vector<int> seen(input_dim, 0);
    for (const auto& g : c.groups) {
        for (std::size_t idx : g.feature_indices) {
            if (idx >= input_dim) throw ConfigError("subnet feature index past the frame width");
            if (seen[idx]++) throw ConfigError("subnets overlap on feature column " + std::to_string(idx));
        }
    }
    c.validate();
    return c;
}

Composite unfreeze(const Composite& c) {
    Composite out = c;
    for (auto& l : out.layers) l.trainable = true;
    return out;
}

Network densify(const Composite& c) {
    c.validate();
    Network net;
    Layer first;
    first.shape = {c.input_dim, c.concat_width(), c.branches().front().shape.activation};
    first.weights.assign(first.shape.input_dim * first.shape.output_dim, 0.0);
    first.biases.assign(first.shape.output_dim, 0.0);
    std::size_t offset = 0;
    for (std::size_t j = 0; j < c.branch_count(); ++j) {
        const Layer& b = c.layers[j];
        if (b.shape.activation != first.shape.activation) {
            throw ConfigError("densify needs one activation across branches");
        }
        const auto& idx = c.groups[j].feature_indices;
        for (std::size_t r = 0; r < b.shape.output_dim; ++r) {
            first.biases[offset + r] = b.biases[r];
            for (std::size_t col = 0; col < idx.size(); ++col) first.weight(offset + r, idx[col]) = b.weight(r, col);
        }
        offset += b.shape.output_dim;
    }
    net.layers.push_back(std::move(first));
    for (const auto& l : c.fusion()) {
        net.layers.push_back(l);
        net.layers.back().trainable = true;
    }
    net.trained = c.trained;
    return net;
}

double score(const Model& m, std::span<const double> frame) {
    return std::visit([&](const auto& model) { return score(model, frame); }, m);
}

std::size_t model_parameter_count(const Model& m) {
    return std::visit([](const auto& model) { return model.parameter_count(); }, m);
}

}  // namespace sddnn

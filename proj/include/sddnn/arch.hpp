#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sddnn/features.hpp"
#include "sddnn/nncore.hpp"

namespace sddnn {

struct FeatureGroup {
    std::string name;
    std::vector<std::size_t> feature_indices;  // sorted columns of the frame vector

    bool operator==(const FeatureGroup&) const = default;
};

/// Disjoint cover of the frame columns {0, ..., feature_dim - 1}.
struct SubnetAssignment {
    std::size_t feature_dim = 0;
    std::vector<FeatureGroup> groups;

    /// Throws ConfigError on empty groups, overlaps, out-of-range or missing columns.
    void validate() const;
};

enum class PartitionMode { knowledge, random };

/// Knowledge mode groups frame columns into pitch, MFCCs, MFBs, intensity and
/// jitter & shimmer (num_groups is ignored). Random mode shuffles the columns with
/// `seed` and slices them into `num_groups` parts whose sizes differ by at most one.
SubnetAssignment partition_features(PartitionMode mode, const LldLayout& layout, std::size_t num_groups,
                                    std::uint64_t seed);

/// Shuffles columns 0..feature_dim-1 with `seed` and slices them into `num_groups`
/// parts whose sizes differ by at most one; each part is sorted.
SubnetAssignment random_partition(std::size_t feature_dim, std::size_t num_groups, std::uint64_t seed);

/// |group| -> hidden_width (tanh) -> 1 (sigmoid), reading only the group's columns.
Network build_subnet(std::span<const std::size_t> group, std::size_t hidden_width, std::uint64_t seed);

/// Subnet hidden layers side by side over disjoint column groups, feeding a fusion stack.
/// `layers` holds the branch layers first (one per group, same order), then the fusion layers.
struct Composite {
    std::size_t input_dim = 0;
    std::vector<FeatureGroup> groups;
    std::vector<Layer> layers;
    bool trained = false;

    std::size_t branch_count() const { return groups.size(); }
    std::size_t concat_width() const;
    std::span<const Layer> branches() const { return std::span<const Layer>(layers).first(groups.size()); }
    std::span<const Layer> fusion() const { return std::span<const Layer>(layers).subspan(groups.size()); }
    std::span<Layer> fusion() { return std::span<Layer>(layers).subspan(groups.size()); }
    std::size_t parameter_count() const { return sddnn::parameter_count(layers); }
    std::size_t trainable_parameter_count() const { return sddnn::trainable_parameter_count(layers); }

    void validate() const;
};

struct CompositePass {
    std::vector<ForwardPass> branches;  // per branch: {selected inputs, hidden}
    ForwardPass fusion;                 // fusion.activations[0] is the concatenated branch hiddens

    std::span<const double> output() const { return fusion.output(); }
};

/// Frozen branch hiddens, concatenated, for one frame.
std::vector<double> branch_hiddens(const Composite& c, std::span<const double> frame);

void forward_into(const Composite& c, std::span<const double> frame, CompositePass& pass);
CompositePass forward(const Composite& c, std::span<const double> frame);
double score(const Composite& c, std::span<const double> frame);

/// Adds scale * dL/dtheta for the trainable layers of `c` into `accum`
/// (entries indexed like `c.layers`).
void backpropagate(const Composite& c, const CompositePass& pass, std::span<const double> target, double scale,
                   Gradients& accum);
Gradients backward(const Composite& c, const CompositePass& pass, std::span<const double> target);

/// Drops each trained subnet's output head, freezes its hidden layer and stacks a
/// freshly initialized fusion stack (tanh hiddens, one sigmoid output) on top.
Composite compose_sd(std::span<const Network> subnets, std::span<const std::size_t> fusion_hidden,
                     std::size_t input_dim, std::uint64_t seed);

/// Same parameters, every layer trainable.
Composite unfreeze(const Composite& c);

/// Fully connected equivalent: first layer D x (sum of branch widths) copies each
/// branch's block and zero-fills every cross-group weight; fusion layers copied.
Network densify(const Composite& c);

/// Any trained model that scores a full frame vector.
using Model = std::variant<Network, Composite>;

double score(const Model& m, std::span<const double> frame);
std::size_t model_parameter_count(const Model& m);

}  // namespace sddnn

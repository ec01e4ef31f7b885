#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "sddnn/arch.hpp"
#include "sddnn/error.hpp"

using namespace sddnn;

namespace {

LldLayout anonymous_layout(std::size_t llds) {
    LldLayout l;
    for (std::size_t i = 0; i < llds; ++i) {
        l.names.push_back("x" + std::to_string(i));
        l.families.emplace_back(std::nullopt);
    }
    return l;
}

std::vector<Network> trained_subnets(const SubnetAssignment& a, std::size_t hidden, std::uint64_t seed) {
    std::vector<Network> out;
    for (std::size_t j = 0; j < a.groups.size(); ++j) {
        out.push_back(build_subnet(a.groups[j].feature_indices, hidden, seed + j));
        out.back().trained = true;
    }
    return out;
}

Composite default_sd(std::uint64_t seed) {
    const auto a = partition_features(PartitionMode::knowledge, LldLayout::default_layout(), 5, 0);
    const auto subnets = trained_subnets(a, 15, seed);
    const std::size_t fusion[] = {30, 10};
    return compose_sd(subnets, fusion, a.feature_dim, seed + 100);
}

double composite_loss(const Composite& c, const std::vector<double>& x, double t) {
    const double y = oracle::composite_score(c, x);
    return (y - t) * (y - t);
}

}  // namespace

TEST_CASE("random partition of 10 columns into 5 groups") {
    const auto a = random_partition(10, 5, 42);
    REQUIRE(a.groups.size() == 5);
    std::vector<std::size_t> all;
    for (const auto& g : a.groups) {
        CHECK(g.feature_indices.size() == 2);
        CHECK(std::is_sorted(g.feature_indices.begin(), g.feature_indices.end()));
        all.insert(all.end(), g.feature_indices.begin(), g.feature_indices.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> want(10);
    std::iota(want.begin(), want.end(), 0);
    CHECK(all == want);
    CHECK_NOTHROW(a.validate());
    CHECK_THROWS_AS(random_partition(10, 11, 1), ConfigError);
}

TEST_CASE("random partition sizes differ by at most one and cover every column") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t llds = 1 + rng() % 10;
        const std::size_t groups = 1 + rng() % (6 * llds);
        const auto a = partition_features(PartitionMode::random, anonymous_layout(llds), groups, rng());
        std::size_t lo = 1000, hi = 0, total = 0;
        std::set<std::size_t> seen;
        for (const auto& g : a.groups) {
            lo = std::min(lo, g.feature_indices.size());
            hi = std::max(hi, g.feature_indices.size());
            total += g.feature_indices.size();
            seen.insert(g.feature_indices.begin(), g.feature_indices.end());
        }
        CHECK(hi - lo <= 1);
        CHECK(total == 6 * llds);
        CHECK(seen.size() == 6 * llds);
    }
}

TEST_CASE("random partition is deterministic per seed") {
    const auto a = partition_features(PartitionMode::random, LldLayout::default_layout(), 5, 9);
    const auto b = partition_features(PartitionMode::random, LldLayout::default_layout(), 5, 9);
    const auto c = partition_features(PartitionMode::random, LldLayout::default_layout(), 5, 10);
    for (std::size_t g = 0; g < 5; ++g) CHECK(a.groups[g].feature_indices == b.groups[g].feature_indices);
    CHECK(a.groups[0].feature_indices != c.groups[0].feature_indices);
}

TEST_CASE("knowledge partition of the default layout") {
    const auto a = partition_features(PartitionMode::knowledge, LldLayout::default_layout(), 5, 0);
    REQUIRE(a.groups.size() == 5);
    CHECK(a.groups[0].name == "pitch");
    CHECK(a.groups[1].name == "mfcc");
    CHECK(a.groups[2].name == "mfb");
    CHECK(a.groups[3].name == "intensity");
    CHECK(a.groups[4].name == "jitter_shimmer");
    CHECK(a.groups[0].feature_indices.size() == 6);
    CHECK(a.groups[1].feature_indices.size() == 72);
    CHECK(a.groups[2].feature_indices.size() == 72);
    CHECK(a.groups[3].feature_indices.size() == 6);
    CHECK(a.groups[4].feature_indices.size() == 12);
    std::size_t total = 0;
    for (const auto& g : a.groups) total += g.feature_indices.size();
    CHECK(total == 168);
    CHECK_THROWS_AS(partition_features(PartitionMode::knowledge, anonymous_layout(3), 5, 0), ConfigError);
}

TEST_CASE("assignment validation") {
    SubnetAssignment a{4, {{"a", {0, 1}}, {"b", {1, 2, 3}}}};
    CHECK_THROWS_AS(a.validate(), ConfigError);
    a.groups[1].feature_indices = {2};
    CHECK_THROWS_AS(a.validate(), ConfigError);
    a.groups[1].feature_indices = {2, 3};
    CHECK_NOTHROW(a.validate());
}

TEST_CASE("build_subnet shapes") {
    std::vector<std::size_t> g(34);
    std::iota(g.begin(), g.end(), 100);
    const auto n = build_subnet(g, 15, 3);
    REQUIRE(n.layers.size() == 2);
    CHECK(n.layers[0].shape == LayerShape{34, 15, Activation::tanh});
    CHECK(n.layers[1].shape == LayerShape{15, 1, Activation::sigmoid});
    CHECK(n.feature_indices == g);
    const auto one = build_subnet(std::vector<std::size_t>{0}, 1, 3);
    CHECK(one.layers[0].shape.input_dim == 1);
    CHECK(one.layers[0].shape.output_dim == 1);
    CHECK(one.layers[1].shape.output_dim == 1);
    CHECK(build_subnet(g, 15, 3).layers[0].weights == n.layers[0].weights);
}

TEST_CASE("compose_sd of five subnets") {
    const Composite c = default_sd(1);
    CHECK(c.branch_count() == 5);
    CHECK(c.concat_width() == 75);
    const auto fusion = c.fusion();
    REQUIRE(fusion.size() == 3);
    CHECK(fusion[0].shape == LayerShape{75, 30, Activation::tanh});
    CHECK(fusion[1].shape == LayerShape{30, 10, Activation::tanh});
    CHECK(fusion[2].shape == LayerShape{10, 1, Activation::sigmoid});
    for (const auto& b : c.branches()) CHECK_FALSE(b.trainable);
    for (const auto& f : fusion) CHECK(f.trainable);
    CHECK(c.trainable_parameter_count() == 75 * 30 + 30 + 30 * 10 + 10 + 10 * 1 + 1);
    CHECK(c.trainable_parameter_count() == 2601);
    CHECK(c.parameter_count() == 2601 + 15 * (168 + 5));
}

TEST_CASE("compose_sd preconditions") {
    const auto a = partition_features(PartitionMode::knowledge, LldLayout::default_layout(), 5, 0);
    auto subnets = trained_subnets(a, 15, 1);
    const std::size_t fusion[] = {30, 10};
    subnets[2].trained = false;
    CHECK_THROWS_AS(compose_sd(subnets, fusion, 168, 1), ConfigError);
    subnets[2].trained = true;
    subnets[1].feature_indices[0] = subnets[0].feature_indices[0];
    CHECK_THROWS_AS(compose_sd(subnets, fusion, 168, 1), ConfigError);
}

TEST_CASE("single subnet with no fusion hidden layers") {
    auto s = build_subnet(std::vector<std::size_t>{0, 1, 2}, 4, 5);
    s.trained = true;
    const Composite c = compose_sd(std::span<const Network>(&s, 1), {}, 3, 7);
    REQUIRE(c.layers.size() == 2);
    CHECK(c.layers[0].weights == s.layers[0].weights);
    CHECK(c.fusion()[0].shape == LayerShape{4, 1, Activation::sigmoid});
}

TEST_CASE("composite forward matches the group-wise oracle and reads only its slices") {
    const Composite c = default_sd(3);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = oracle::random_vector(rng, 168, -2.0, 2.0);
        CHECK(score(c, x) == doctest::Approx(oracle::composite_score(c, x)).epsilon(1e-13));
        // Zeroing every column outside group 1 leaves branch 1's hidden activations unchanged.
        const auto pass = forward(c, x);
        auto y = x;
        const auto& g = c.groups[1].feature_indices;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (std::find(g.begin(), g.end(), i) == g.end()) y[i] = 0.0;
        }
        const auto pass_y = forward(c, y);
        CHECK(pass.branches[1].activations.back() == pass_y.branches[1].activations.back());
    }
}

TEST_CASE("composite backprop matches finite differences on trainable layers") {
    auto s0 = build_subnet(std::vector<std::size_t>{0, 2}, 3, 1);
    auto s1 = build_subnet(std::vector<std::size_t>{1, 3, 4}, 2, 2);
    s0.trained = s1.trained = true;
    const std::vector<Network> subnets{s0, s1};
    const std::size_t fusion[] = {4};
    for (bool joint : {false, true}) {
        Composite c = compose_sd(subnets, fusion, 5, 3);
        if (joint) c = unfreeze(c);
        const std::vector<double> x{0.3, -0.8, 0.5, 0.1, -0.4};
        const double t = 1.0;
        const Gradients grads = backward(c, forward(c, x), std::vector<double>{t});
        std::size_t checked = 0;
        std::size_t expected = 0;
        for (const auto& l : c.layers) expected += l.trainable ? l.weights.size() : 0;
        for (const auto& g : grads) {
            CHECK(c.layers[g.layer].trainable);
            for (std::size_t i = 0; i < g.weights.size(); ++i) {
                Composite p = c;
                Composite m = c;
                p.layers[g.layer].weights[i] += 1e-5;
                m.layers[g.layer].weights[i] -= 1e-5;
                const double fd = (composite_loss(p, x, t) - composite_loss(m, x, t)) / 2e-5;
                CHECK(std::abs(fd - g.weights[i]) / std::max(std::abs(g.weights[i]), 1e-8) < 1e-4);
                ++checked;
            }
        }
        CHECK(checked == expected);
    }
}

TEST_CASE("unfreeze keeps values and counts") {
    const Composite c = default_sd(5);
    const Composite u = unfreeze(c);
    CHECK(u.parameter_count() == c.parameter_count());
    CHECK(u.trainable_parameter_count() == u.parameter_count());
    for (std::size_t i = 0; i < c.layers.size(); ++i) CHECK(u.layers[i].weights == c.layers[i].weights);
    std::mt19937_64 rng(1);
    const auto x = oracle::random_vector(rng, 168, -1.0, 1.0);
    CHECK(score(u, x) == score(c, x));
    const Composite uu = unfreeze(u);
    for (std::size_t i = 0; i < u.layers.size(); ++i) {
        CHECK(uu.layers[i].weights == u.layers[i].weights);
        CHECK(uu.layers[i].trainable == u.layers[i].trainable);
    }
}

TEST_CASE("densify reproduces the composite and zero-fills cross-group weights") {
    const Composite c = default_sd(7);
    const Network d = densify(c);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = oracle::random_vector(rng, 168, -3.0, 3.0);
        const double a = score(c, x);
        const double b = score(d, x);
        CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
    }
    const auto& first = d.layers[0].weights;
    const auto zeros = static_cast<std::size_t>(std::count(first.begin(), first.end(), 0.0));
    std::size_t block = 0;
    for (const auto& g : c.groups) block += 15 * g.feature_indices.size();
    CHECK(zeros == 75 * 168 - block);
    CHECK(d.parameter_count() > c.parameter_count());
    CHECK(d.trainable_parameter_count() == d.parameter_count());
    CHECK(d.parameter_count() == 168 * 75 + 75 + 2601);
}

TEST_CASE("densify of one subnet over every feature copies the first layer") {
    auto s = build_subnet(std::vector<std::size_t>{0, 1, 2, 3}, 3, 5);
    s.trained = true;
    const std::size_t fusion[] = {2};
    const Composite c = compose_sd(std::span<const Network>(&s, 1), fusion, 4, 1);
    const Network d = densify(c);
    CHECK(d.layers[0].weights == s.layers[0].weights);
    CHECK(d.layers[0].biases == s.layers[0].biases);
}

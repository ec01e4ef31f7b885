#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sddnn/corpus.hpp"
#include "sddnn/features.hpp"

namespace fixture {

// Labeled frames over anonymous LLD columns: every couple owns one session per
// class, and label-1 frames are shifted by `shift` along the first `informative` columns.
struct Toy {
    sddnn::LldLayout layout;
    std::vector<sddnn::FrameFeature> frames;
    std::vector<sddnn::SessionRecord> records;  // binary_label set, rating under "Blame"
};

inline sddnn::LldLayout anonymous_layout(std::size_t llds) {
    sddnn::LldLayout l;
    for (std::size_t i = 0; i < llds; ++i) {
        l.names.push_back("lld_" + std::to_string(i));
        l.families.push_back(std::nullopt);
    }
    return l;
}

struct ToySpec {
    std::size_t couples = 6;
    std::size_t frames_per_session = 10;
    std::size_t llds = 5;
    std::size_t informative = 6;
    double shift = 1.5;
    // Every session of a class gets the same frames.
    bool duplicate_sessions = false;
    std::uint64_t seed = 1;
};

inline Toy make_toy(const ToySpec& spec) {
    Toy t;
    t.layout = anonymous_layout(spec.llds);
    const std::size_t width = t.layout.frame_dim();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto session_frames = [&](int label) {
        std::vector<std::vector<double>> out(spec.frames_per_session, std::vector<double>(width));
        for (auto& f : out) {
            for (std::size_t c = 0; c < width; ++c) f[c] = noise(rng) + (label == 1 && c < spec.informative ? spec.shift : 0.0);
        }
        return out;
    };
    const auto template0 = session_frames(0);
    const auto template1 = session_frames(1);
    for (std::size_t c = 0; c < spec.couples; ++c) {
        for (int label = 0; label < 2; ++label) {
            sddnn::SessionRecord r;
            r.couple_id = "c" + std::to_string(c);
            r.session_id = r.couple_id + "_s" + std::to_string(label);
            r.speaker_id = r.couple_id + "_F";
            r.ratings["Blame"] = label == 1 ? 8.0 : 2.0;
            r.binary_label = label;
            const auto values = spec.duplicate_sessions ? (label == 1 ? template1 : template0) : session_frames(label);
            for (std::size_t k = 0; k < values.size(); ++k) {
                t.frames.push_back({r.session_id, r.speaker_id, static_cast<double>(k), values[k]});
            }
            t.records.push_back(std::move(r));
        }
    }
    return t;
}

}  // namespace fixture

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sddnn/features.hpp"

namespace sddnn {

enum class Gender { female, male };

std::string_view to_string(Gender g);
Gender gender_from_string(std::string_view s);

/// One speaker in one session: the unit that carries a rating and a label.
struct SessionKey {
    std::string session_id;
    std::string speaker_id;

    auto operator<=>(const SessionKey&) const = default;
    std::string str() const { return session_id + "/" + speaker_id; }
};

struct SessionRecord {
    std::string session_id;
    std::string couple_id;
    std::string speaker_id;
    Gender gender = Gender::female;
    std::map<std::string, double> ratings;  // behavior code -> rating in [1, 9]
    std::optional<int> binary_label;

    SessionKey key() const { return {session_id, speaker_id}; }
    void validate() const;
};

struct ExtremeSelection {
    std::vector<SessionRecord> selected;  // ascending rating; labels set
    /// Rating ties straddled a cut, so session ids decided membership.
    bool degenerate = false;
};

/// Bottom `per_class` ratings of `code` -> label 0, top `per_class` -> label 1.
/// Ties are ordered by session id (then speaker id) ascending.
ExtremeSelection select_extremes(std::span<const SessionRecord> sessions, const std::string& code,
                                 std::size_t per_class);

struct Fold {
    std::string held_out_couple;
    std::vector<SessionKey> train;
    std::vector<SessionKey> test;
};

struct FoldPlan {
    std::vector<Fold> folds;
};

/// One fold per couple (ascending couple id): its sessions are tested, all others train.
FoldPlan make_folds(std::span<const SessionRecord> labeled);

/// A frame paired with its session's label. `input` views the frame's values,
/// which must outlive the pair; `session` and `couple_id` tag its lineage.
struct TrainingPair {
    std::span<const double> input;
    double target = 0.0;
    SessionKey session;
    std::string couple_id;
};

/// Pairs each frame with its session's binary label. Throws InputError for a frame
/// whose session is missing from `labeled` or unlabeled.
std::vector<TrainingPair> label_frames(std::span<const FrameFeature> frames, std::span<const SessionRecord> labeled);

struct BehaviorCodeSpec {
    std::string name;
    /// LLD columns whose value shifts during this code's behavior episodes.
    std::vector<std::size_t> effect_columns;
    /// Rating = 5 + polarity * (latent - 5) + N(0, rating_noise), clipped to [1, 9].
    double polarity = 1.0;
    double rating_noise = 0.5;
};

struct SynthConfig {
    std::size_t num_couples = 30;
    std::size_t sessions_per_couple = 2;
    LldLayout layout = LldLayout::default_layout();
    double hop = 0.010;
    double mean_session_duration = 40.0;  // seconds of speech per speaker
    double effect_size = 0.35;
    double nuisance_scale = 1.0;
    double noise_scale = 1.0;
    /// Fraction of samples inside behavior (and nuisance) episodes, and their mean length.
    double episode_fraction = 0.3;
    double mean_episode_seconds = 2.0;
    double min_segment_seconds = 0.8;
    double max_segment_seconds = 6.0;
    std::vector<BehaviorCodeSpec> codes = default_codes();
    std::uint64_t seed = 1;

    /// Acceptance, Negativity and Blame over the default layout.
    static std::vector<BehaviorCodeSpec> default_codes();
    void validate() const;
};

struct SynthCorpus {
    LldLayout layout;
    std::vector<LldStream> streams;
    std::vector<SessionRecord> records;
};

SynthCorpus synth_corpus(const SynthConfig& config);

}  // namespace sddnn

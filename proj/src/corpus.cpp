#include "sddnn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "sddnn/error.hpp"
#include "sddnn/nncore.hpp"

namespace sddnn {

std::string_view to_string(Gender g) { return g == Gender::female ? "F" : "M"; }

Gender gender_from_string(std::string_view s) {
    if (s == "F" || s == "f" || s == "female") return Gender::female;
    if (s == "M" || s == "m" || s == "male") return Gender::male;
    throw InputError("unknown gender '" + std::string(s) + "'");
}

void SessionRecord::validate() const {
    if (session_id.empty() || couple_id.empty() || speaker_id.empty()) {
        throw InputError("session record needs session, couple and speaker ids");
    }
    for (const auto& [code, rating] : ratings) {
        if (!(rating >= 1.0 && rating <= 9.0)) {
            throw InputError("rating for '" + code + "' of " + key().str() + " lies outside [1, 9]");
        }
    }
}

ExtremeSelection select_extremes(std::span<const SessionRecord> sessions, const std::string& code,
                                 std::size_t per_class) {
    if (per_class == 0) throw ConfigError("extreme selection needs per_class >= 1");
    std::vector<SessionRecord> rated;
    for (const auto& s : sessions) {
        if (s.ratings.contains(code)) rated.push_back(s);
    }
    if (rated.size() < 2 * per_class) {
        throw ConfigError("code '" + code + "' has " + std::to_string(rated.size()) + " rated sessions; need " +
                          std::to_string(2 * per_class));
    }
    std::sort(rated.begin(), rated.end(), [&](const SessionRecord& a, const SessionRecord& b) {
        const double ra = a.ratings.at(code);
        const double rb = b.ratings.at(code);
        if (ra != rb) return ra < rb;
        return a.key() < b.key();
    });
    const std::size_t n = rated.size();
    auto rating = [&](std::size_t i) { return rated[i].ratings.at(code); };

    ExtremeSelection out;
    out.degenerate = rating(per_class - 1) == rating(per_class) || rating(n - per_class - 1) == rating(n - per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        out.selected.push_back(rated[i]);
        out.selected.back().binary_label = 0;
    }
    for (std::size_t i = n - per_class; i < n; ++i) {
        out.selected.push_back(rated[i]);
        out.selected.back().binary_label = 1;
    }
    return out;
}

FoldPlan make_folds(std::span<const SessionRecord> labeled) {
    std::set<std::string> couples;
    for (const auto& s : labeled) {
        if (s.couple_id.empty()) throw InputError("session " + s.key().str() + " has no couple id");
        couples.insert(s.couple_id);
    }
    FoldPlan plan;
    for (const auto& couple : couples) {
        Fold fold;
        fold.held_out_couple = couple;
        for (const auto& s : labeled) (s.couple_id == couple ? fold.test : fold.train).push_back(s.key());
        std::sort(fold.test.begin(), fold.test.end());
        std::sort(fold.train.begin(), fold.train.end());
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

std::vector<TrainingPair> label_frames(std::span<const FrameFeature> frames, std::span<const SessionRecord> labeled) {
    std::map<SessionKey, const SessionRecord*> index;
    for (const auto& s : labeled) index[s.key()] = &s;
    std::vector<TrainingPair> pairs;
    pairs.reserve(frames.size());
    for (const auto& f : frames) {
        SessionKey key{f.session_id, f.speaker_id};
        const auto it = index.find(key);
        if (it == index.end() || !it->second->binary_label) {
            throw InputError("frame from unlabeled session " + key.str());
        }
        pairs.push_back({f.values, static_cast<double>(*it->second->binary_label), std::move(key), it->second->couple_id});
    }
    return pairs;
}

std::vector<BehaviorCodeSpec> SynthConfig::default_codes() {
    // Default layout columns: 0 pitch, 1 intensity, 2 jitter, 3 shimmer, 4-15 MFCC, 16-27 MFB.
    return {
        {"Acceptance", {1, 3, 10, 22}, -1.0, 0.5},
        {"Negativity", {0, 1, 6, 18}, 1.0, 0.5},
        {"Blame", {0, 2, 8, 20}, 1.0, 0.8},
    };
}

void SynthConfig::validate() const {
    if (num_couples == 0 || sessions_per_couple == 0) throw ConfigError("synthetic corpus needs couples and sessions");
    if (layout.size() == 0) throw ConfigError("synthetic corpus needs at least one LLD column");
    if (!(hop > 0.0) || !(mean_session_duration > 0.0)) throw ConfigError("hop and session duration must be positive");
    if (!(effect_size >= 0.0) || !(nuisance_scale >= 0.0) || !(noise_scale >= 0.0)) {
        throw ConfigError("effect, nuisance and noise scales must be >= 0");
    }
    if (!(episode_fraction > 0.0 && episode_fraction < 1.0) || !(mean_episode_seconds > hop)) {
        throw ConfigError("episode fraction must lie in (0, 1) and episodes must last longer than one hop");
    }
    if (!(min_segment_seconds > 0.0) || max_segment_seconds < min_segment_seconds) {
        throw ConfigError("segment length range is invalid");
    }
    if (codes.empty()) throw ConfigError("synthetic corpus needs at least one behavior code");
    std::set<std::string> names;
    for (const auto& c : codes) {
        if (c.name.empty() || !names.insert(c.name).second) throw ConfigError("behavior code names must be unique");
        for (std::size_t col : c.effect_columns) {
            if (col >= layout.size()) throw ConfigError("code '" + c.name + "' effect column is outside the layout");
        }
    }
}

namespace {

// Two-state Markov chain with the requested stationary on-fraction and mean on-run length.
struct EpisodeChain {
    double p_off;
    double p_on;
    bool on = false;

    EpisodeChain(double fraction, double mean_len_samples, Rng& rng)
        : p_off(1.0 / mean_len_samples), p_on(p_off * fraction / (1.0 - fraction)), on(uniform01(rng) < fraction) {}

    bool step(Rng& rng) {
        on = on ? uniform01(rng) >= p_off : uniform01(rng) < p_on;
        return on;
    }
};

std::string padded(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, n);
    return buf;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t dim = config.layout.size();
    const double episode_len = config.mean_episode_seconds / config.hop;

    SynthCorpus corpus;
    corpus.layout = config.layout;
    for (std::size_t c = 0; c < config.num_couples; ++c) {
        const std::string couple = padded("c", c);
        for (Gender gender : {Gender::female, Gender::male}) {
            const std::string speaker = couple + "_" + std::string(to_string(gender));
            std::vector<double> offset(dim);
            std::vector<double> burst(dim);
            for (auto& v : offset) v = config.nuisance_scale * normal(rng);
            for (auto& v : burst) v = config.nuisance_scale * normal(rng);

            for (std::size_t s = 0; s < config.sessions_per_couple; ++s) {
                SessionRecord record;
                record.session_id = couple + "_s" + std::to_string(s + 1);
                record.couple_id = couple;
                record.speaker_id = speaker;
                record.gender = gender;
                const double latent = 1.0 + 8.0 * uniform01(rng);
                std::vector<double> shift(dim, 0.0);
                std::vector<EpisodeChain> chains;
                for (const auto& code : config.codes) {
                    const double r = std::clamp(5.0 + code.polarity * (latent - 5.0) + code.rating_noise * normal(rng),
                                                1.0, 9.0);
                    record.ratings[code.name] = r;
                    chains.emplace_back(config.episode_fraction, episode_len, rng);
                }
                EpisodeChain nuisance(config.episode_fraction, episode_len, rng);

                LldStream stream;
                stream.session_id = record.session_id;
                stream.couple_id = couple;
                stream.speaker_id = speaker;
                stream.hop = config.hop;
                stream.dim = dim;
                const double duration = config.mean_session_duration * (0.75 + 0.5 * uniform01(rng));
                double t = 0.5 * uniform01(rng);
                double speech = 0.0;
                std::vector<double> sample(dim);
                while (speech < duration) {
                    const double len = config.min_segment_seconds +
                                       (config.max_segment_seconds - config.min_segment_seconds) * uniform01(rng);
                    const auto n = static_cast<std::size_t>(std::max<long long>(1, std::llround(len / config.hop)));
                    Segment seg;
                    seg.id = "g" + std::to_string(stream.segments.size());
                    seg.start = static_cast<double>(std::llround(t / config.hop)) * config.hop;
                    seg.samples.reserve(n * dim);
                    for (std::size_t i = 0; i < n; ++i) {
                        std::fill(shift.begin(), shift.end(), 0.0);
                        for (std::size_t k = 0; k < config.codes.size(); ++k) {
                            if (!chains[k].step(rng)) continue;
                            const auto& code = config.codes[k];
                            const double delta = (record.ratings[code.name] - 5.0) * config.effect_size;
                            for (std::size_t col : code.effect_columns) shift[col] += delta;
                        }
                        const bool burst_on = nuisance.step(rng);
                        for (std::size_t d = 0; d < dim; ++d) {
                            double v = offset[d] + shift[d] + config.noise_scale * normal(rng);
                            if (burst_on) v += burst[d];
                            seg.samples.push_back(v);
                        }
                    }
                    const double seg_seconds = static_cast<double>(n) * config.hop;
                    stream.segments.push_back(std::move(seg));
                    speech += seg_seconds;
                    t = stream.segments.back().start + seg_seconds + 0.2 + 1.3 * uniform01(rng);
                }
                corpus.streams.push_back(std::move(stream));
                corpus.records.push_back(std::move(record));
            }
        }
    }
    return corpus;
}

}  // namespace sddnn

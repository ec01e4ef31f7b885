#include "sddnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "sddnn/error.hpp"

namespace sddnn {

std::string_view to_string(LldFamily f) {
    switch (f) {
        case LldFamily::pitch:
            return "pitch";
        case LldFamily::intensity:
            return "intensity";
        case LldFamily::jitter:
            return "jitter";
        case LldFamily::shimmer:
            return "shimmer";
        case LldFamily::mfcc:
            return "mfcc";
        case LldFamily::mfb:
            return "mfb";
    }
    return "pitch";
}

std::optional<LldFamily> family_from_string(std::string_view name) {
    for (auto f : {LldFamily::pitch, LldFamily::intensity, LldFamily::jitter, LldFamily::shimmer, LldFamily::mfcc,
                   LldFamily::mfb}) {
        if (name == to_string(f)) return f;
    }
    return std::nullopt;
}

std::optional<LldFamily> LldLayout::frame_column_family(std::size_t index) const {
    const std::size_t lld = index / kFunctionalsPerLld;
    if (lld >= families.size()) return std::nullopt;
    return families[lld];
}

LldLayout LldLayout::default_layout() {
    LldLayout layout;
    auto add = [&](std::string name, LldFamily f) {
        layout.names.push_back(std::move(name));
        layout.families.emplace_back(f);
    };
    add("pitch", LldFamily::pitch);
    add("intensity", LldFamily::intensity);
    add("jitter", LldFamily::jitter);
    add("shimmer", LldFamily::shimmer);
    for (int i = 1; i <= 12; ++i) add("mfcc_" + std::to_string(i), LldFamily::mfcc);
    for (int i = 1; i <= 12; ++i) add("mfb_" + std::to_string(i), LldFamily::mfb);
    return layout;
}

std::size_t LldStream::total_samples() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += sample_count(s);
    return n;
}

void LldStream::validate() const {
    if (!(hop > 0.0)) throw InputError("stream hop must be positive");
    double prev_end = -1e300;
    for (const auto& s : segments) {
        if (dim == 0 || s.samples.size() % dim != 0) {
            throw InputError("segment '" + s.id + "' of " + session_id + "/" + speaker_id + " has ragged LLD vectors");
        }
        if (s.start < prev_end - 1e-9) {
            throw InputError("segments of " + session_id + "/" + speaker_id + " overlap or are out of order");
        }
        prev_end = s.start + static_cast<double>(sample_count(s)) * hop;
    }
}

LldStream normalize_session(const LldStream& stream) {
    if (stream.total_samples() < 2) throw InputError("normalization needs at least two LLD vectors");
    const std::size_t dim = stream.dim;
    std::vector<double> sum(dim, 0.0);
    std::vector<std::size_t> count(dim, 0);
    for (const auto& seg : stream.segments) {
        for (std::size_t i = 0; i < seg.samples.size(); ++i) {
            const double v = seg.samples[i];
            if (std::isnan(v)) continue;
            sum[i % dim] += v;
            ++count[i % dim];
        }
    }
    std::vector<double> mean(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) mean[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
    std::vector<double> sq(dim, 0.0);
    for (const auto& seg : stream.segments) {
        for (std::size_t i = 0; i < seg.samples.size(); ++i) {
            const double v = seg.samples[i];
            if (std::isnan(v)) continue;
            const double d = v - mean[i % dim];
            sq[i % dim] += d * d;
        }
    }
    std::vector<double> sd(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) sd[c] = count[c] ? std::sqrt(sq[c] / static_cast<double>(count[c])) : 0.0;

    LldStream out = stream;
    for (auto& seg : out.segments) {
        for (std::size_t i = 0; i < seg.samples.size(); ++i) {
            double& v = seg.samples[i];
            if (std::isnan(v)) continue;
            const std::size_t c = i % dim;
            v = sd[c] < 1e-12 ? 0.0 : (v - mean[c]) / sd[c];
        }
    }
    return out;
}

LldStream drop_short_segments(const LldStream& stream, double min_duration) {
    LldStream out = stream;
    out.segments.clear();
    for (const auto& seg : stream.segments) {
        const double duration = static_cast<double>(stream.sample_count(seg)) * stream.hop;
        // Durations are hop multiples; the tolerance keeps e.g. 150 x 0.01 s at 1.5 s.
        if (duration + 1e-9 >= min_duration) out.segments.push_back(seg);
    }
    return out;
}

double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InputError("percentile of an empty sequence");
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> extract_functionals(std::span<const double> window, std::size_t cols) {
    if (cols == 0 || window.empty() || window.size() % cols != 0) throw InputError("functional window is empty or ragged");
    const std::size_t rows = window.size() / cols;
    std::vector<double> out(cols * kFunctionalsPerLld);
    std::vector<double> column(rows);
    for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            column[r] = window[r * cols + c];
            sum += column[r];
        }
        const double mean = sum / static_cast<double>(rows);
        double sq = 0.0;
        for (double v : column) sq += (v - mean) * (v - mean);
        std::sort(column.begin(), column.end());
        const double p1 = percentile_sorted(column, 1.0);
        const double p99 = percentile_sorted(column, 99.0);
        double* f = out.data() + c * kFunctionalsPerLld;
        f[0] = p1;
        f[1] = p99;
        f[2] = p99 - p1;
        f[3] = mean;
        f[4] = percentile_sorted(column, 50.0);
        f[5] = std::sqrt(sq / static_cast<double>(rows));
    }
    return out;
}

std::size_t window_count(std::size_t total, std::size_t window, std::size_t shift) {
    if (window == 0 || shift == 0) throw ConfigError("window and shift must span at least one sample");
    return total < window ? 0 : (total - window) / shift + 1;
}

namespace {

std::size_t to_samples(double seconds, double hop, const char* what) {
    if (!(seconds > 0.0) || !std::isfinite(seconds)) throw ConfigError(std::string(what) + " must be positive");
    const auto n = static_cast<long long>(std::llround(seconds / hop));
    if (n < 1) throw ConfigError(std::string(what) + " is shorter than one hop");
    return static_cast<std::size_t>(n);
}

bool has_nan(std::span<const double> v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return std::isnan(x); });
}

}  // namespace

FrameExtraction window_session(const LldStream& stream, const WindowConfig& config) {
    const std::size_t w = to_samples(config.window_len, stream.hop, "window length");
    const std::size_t s = to_samples(config.shift, stream.hop, "window shift");
    stream.validate();
    const std::size_t dim = stream.dim;

    FrameExtraction result;
    auto emit = [&](std::span<const double> window, std::size_t k) {
        if (has_nan(window)) {
            ++result.dropped_nan_frames;
            return;
        }
        FrameFeature f;
        f.session_id = stream.session_id;
        f.speaker_id = stream.speaker_id;
        f.window_start = static_cast<double>(k) * config.shift;
        f.values = extract_functionals(window, dim);
        result.frames.push_back(std::move(f));
    };

    std::vector<double> speech;
    speech.reserve(stream.total_samples() * dim);
    std::vector<std::int64_t> ticks;
    for (const auto& seg : stream.segments) {
        speech.insert(speech.end(), seg.samples.begin(), seg.samples.end());
        const auto first = std::llround(seg.start / stream.hop);
        for (std::size_t i = 0; i < stream.sample_count(seg); ++i) ticks.push_back(first + static_cast<std::int64_t>(i));
    }
    const std::size_t total = ticks.size();

    if (config.time_axis == TimeAxis::speech) {
        const std::size_t n = window_count(total, w, s);
        result.too_short = n == 0;
        for (std::size_t k = 0; k < n; ++k) {
            emit(std::span<const double>(speech).subspan(k * s * dim, w * dim), k);
        }
        return result;
    }

    if (total == 0) {
        result.too_short = true;
        return result;
    }
    const std::int64_t origin = ticks.front();
    const std::int64_t end = ticks.back() + 1;
    const auto wi = static_cast<std::int64_t>(w);
    const auto si = static_cast<std::int64_t>(s);
    result.too_short = end - origin < wi;
    for (std::size_t k = 0;; ++k) {
        const std::int64_t a = origin + static_cast<std::int64_t>(k) * si;
        if (a + wi > end) break;
        const auto lo = static_cast<std::size_t>(std::lower_bound(ticks.begin(), ticks.end(), a) - ticks.begin());
        const auto hi = static_cast<std::size_t>(std::lower_bound(ticks.begin(), ticks.end(), a + wi) - ticks.begin());
        if (hi == lo) continue;
        emit(std::span<const double>(speech).subspan(lo * dim, (hi - lo) * dim), k);
    }
    return result;
}

std::vector<double> FeatureScaler::apply(std::span<const double> frame) const {
    if (empty()) return {frame.begin(), frame.end()};
    if (frame.size() != mean.size()) {
        throw InputError("frame width " + std::to_string(frame.size()) + " does not match the feature scaler (" +
                         std::to_string(mean.size()) + ")");
    }
    std::vector<double> out(frame.size());
    for (std::size_t c = 0; c < frame.size(); ++c) out[c] = (frame[c] - mean[c]) / scale[c];
    return out;
}

FeatureScaler fit_scaler(std::span<const std::span<const double>> rows) {
    if (rows.empty()) throw InputError("feature scaling needs at least one frame");
    const std::size_t dim = rows.front().size();
    FeatureScaler s;
    s.mean.assign(dim, 0.0);
    s.scale.assign(dim, 0.0);
    for (const auto& r : rows) {
        if (r.size() != dim) throw InputError("frames have inconsistent widths");
        for (std::size_t c = 0; c < dim; ++c) s.mean[c] += r[c];
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < dim; ++c) s.scale[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
    }
    for (auto& v : s.scale) {
        v = std::sqrt(v / n);
        if (v < 1e-12) v = 1.0;
    }
    return s;
}

CorpusExtraction extract_corpus(std::span<const LldStream> streams, double min_segment_seconds,
                                const WindowConfig& config) {
    CorpusExtraction out;
    for (const auto& stream : streams) {
        const std::string name = stream.session_id + "/" + stream.speaker_id;
        const LldStream kept = drop_short_segments(stream, min_segment_seconds);
        out.dropped_segments += stream.segments.size() - kept.segments.size();
        if (kept.total_samples() < 2) {
            out.empty_streams.push_back(name);
            out.warnings.push_back(name + " has no speech left after dropping short segments");
            continue;
        }
        FrameExtraction ex = window_session(normalize_session(kept), config);
        out.dropped_nan_frames += ex.dropped_nan_frames;
        if (ex.too_short) out.warnings.push_back(name + " holds less than one window of speech");
        if (ex.frames.empty()) out.empty_streams.push_back(name);
        for (auto& f : ex.frames) out.frames.push_back(std::move(f));
    }
    return out;
}

}  // namespace sddnn

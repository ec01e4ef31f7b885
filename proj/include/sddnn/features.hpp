#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sddnn {

/// Number of functionals computed per LLD column.
inline constexpr std::size_t kFunctionalsPerLld = 6;

/// Functional order inside each LLD's block of the frame vector.
enum class Functional : std::size_t { p1 = 0, p99, range, mean, median, stddev };

enum class LldFamily { pitch, intensity, jitter, shimmer, mfcc, mfb };

std::string_view to_string(LldFamily f);
std::optional<LldFamily> family_from_string(std::string_view name);

/// Ordered LLD column names with their family labels. A column without a
/// label is allowed here; knowledge-based partitioning rejects it.
struct LldLayout {
    std::vector<std::string> names;
    std::vector<std::optional<LldFamily>> families;

    std::size_t size() const { return names.size(); }
    std::size_t frame_dim() const { return names.size() * kFunctionalsPerLld; }
    /// Family of frame column `index` (LLD index / 6).
    std::optional<LldFamily> frame_column_family(std::size_t index) const;

    /// pitch, intensity, jitter, shimmer, 12 MFCCs, 12 MFBs: 28 LLDs, 168 frame columns.
    static LldLayout default_layout();
};

struct Segment {
    std::string id;
    double start = 0.0;  // seconds, session wall-clock
    /// Row-major samples, one LLD vector of `LldStream::dim` values per hop.
    std::vector<double> samples;
};

struct LldStream {
    std::string session_id;
    std::string couple_id;
    std::string speaker_id;
    double hop = 0.010;
    std::size_t dim = 0;
    std::vector<Segment> segments;

    std::size_t sample_count(const Segment& s) const { return dim == 0 ? 0 : s.samples.size() / dim; }
    std::size_t total_samples() const;
    double speech_seconds() const { return static_cast<double>(total_samples()) * hop; }
    /// Throws InputError on ragged segments or overlapping / unordered segments.
    void validate() const;
};

struct FrameFeature {
    std::string session_id;
    std::string speaker_id;
    double window_start = 0.0;
    std::vector<double> values;
};

/// z-scores every LLD column over the whole session-speaker stream (population std).
/// Columns with std < 1e-12 become zero; NaN samples are skipped in the statistics
/// and left as NaN.
LldStream normalize_session(const LldStream& stream);

/// Removes segments shorter than `min_duration` seconds.
LldStream drop_short_segments(const LldStream& stream, double min_duration = 1.5);

/// Linear-interpolation percentile at rank (p/100)(n-1) over an ascending sequence.
double percentile_sorted(std::span<const double> sorted, double p);

/// Six functionals per column of a row-major `rows x cols` window:
/// p1, p99, p99 - p1, mean, median, population std, column-major in the output.
std::vector<double> extract_functionals(std::span<const double> window, std::size_t cols);

enum class TimeAxis { speech, wall };

struct WindowConfig {
    double window_len = 20.0;
    double shift = 1.0;
    TimeAxis time_axis = TimeAxis::speech;
};

struct FrameExtraction {
    std::vector<FrameFeature> frames;
    std::size_t dropped_nan_frames = 0;
    /// Set when the stream holds less than one window of speech.
    bool too_short = false;
};

/// Number of windows the speech-axis slider emits for `total` samples.
std::size_t window_count(std::size_t total, std::size_t window, std::size_t shift);

FrameExtraction window_session(const LldStream& stream, const WindowConfig& config = {});

/// Per-column standardization fitted on training frames; constant columns are only centered.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const { return mean.empty(); }
    /// Returns the frame unchanged when empty.
    std::vector<double> apply(std::span<const double> frame) const;
};

FeatureScaler fit_scaler(std::span<const std::span<const double>> rows);

struct CorpusExtraction {
    std::vector<FrameFeature> frames;
    std::size_t dropped_segments = 0;
    std::size_t dropped_nan_frames = 0;
    /// Streams that produced no frame at all, as "session/speaker".
    std::vector<std::string> empty_streams;
    std::vector<std::string> warnings;
};

/// Per stream: drop short segments, normalize, window.
CorpusExtraction extract_corpus(std::span<const LldStream> streams, double min_segment_seconds = 1.5,
                                const WindowConfig& config = {});

}  // namespace sddnn

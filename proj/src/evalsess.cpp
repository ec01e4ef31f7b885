#include "sddnn/evalsess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "sddnn/csv.hpp"
#include "sddnn/error.hpp"

namespace sddnn {

double aggregate_session(std::span<const double> frame_scores, double clamp_eps) {
    if (frame_scores.empty()) throw InputError("cannot aggregate a session without frames");
    if (!(clamp_eps >= 0.0) || clamp_eps >= 0.5) throw ConfigError("clamp epsilon must lie in [0, 0.5)");
    double log_sum = 0.0;
    for (double q : frame_scores) log_sum += std::log(std::clamp(q, clamp_eps, 1.0 - clamp_eps));
    return std::exp(log_sum / static_cast<double>(frame_scores.size()));
}

double threshold_error(std::span<const LabeledScore> data, double threshold) {
    if (data.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const auto& d : data) wrong += (d.score > threshold ? 1 : 0) != d.label;
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

std::vector<double> threshold_candidates(std::span<const LabeledScore> data) {
    std::vector<double> values;
    values.reserve(data.size());
    for (const auto& d : data) values.push_back(d.score);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> out;
    if (values.empty()) return out;
    // Sentinels sit halfway to 0 and 1 when that is strictly outside the scores.
    const double lo = values.front() / 2.0;
    out.push_back(lo < values.front() ? lo : values.front() - 1.0);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) out.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
    const double hi = (values.back() + 1.0) / 2.0;
    out.push_back(hi > values.back() ? hi : values.back() + 1.0);
    return out;
}

ThresholdModel fit_threshold(std::span<const LabeledScore> data) {
    std::size_t positives = 0;
    for (const auto& d : data) {
        if (d.label != 0 && d.label != 1) throw InputError("threshold labels must be 0 or 1");
        positives += static_cast<std::size_t>(d.label);
    }
    if (positives == 0 || positives == data.size()) {
        throw ConfigError("threshold fitting needs both classes in the training data");
    }

    // Sweep the candidates in ascending order; a threshold between sorted[i-1] and
    // sorted[i] predicts 0 for the first i scores and 1 for the rest.
    std::vector<LabeledScore> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
    const auto candidates = threshold_candidates(data);
    std::size_t below = 0;  // scores <= current candidate
    std::size_t ones_below = 0;
    const std::size_t zeros_total = data.size() - positives;
    ThresholdModel best{candidates.front(), 2.0};
    for (double t : candidates) {
        while (below < sorted.size() && sorted[below].score <= t) ones_below += static_cast<std::size_t>(sorted[below++].label);
        const std::size_t zeros_below = below - ones_below;
        const std::size_t wrong = ones_below + (zeros_total - zeros_below);
        const double err = static_cast<double>(wrong) / static_cast<double>(data.size());
        if (err < best.training_error) best = {t, err};
    }
    return best;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw InputError("accuracy needs equal, non-empty prediction and label lists");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

void write_trajectory(std::ostream& out, std::span<const TrajectorySeries> series) {
    std::map<double, std::vector<const double*>> rows;
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ts = series[s];
        if (ts.times.size() != ts.scores.size()) throw InputError("trajectory '" + ts.name + "' has ragged columns");
        for (std::size_t i = 0; i < ts.times.size(); ++i) {
            if (i > 0 && !(ts.times[i] > ts.times[i - 1])) {
                throw InputError("trajectory '" + ts.name + "' frame times are not increasing");
            }
            auto& row = rows[ts.times[i]];
            row.resize(series.size(), nullptr);
            row[s] = &ts.scores[i];
        }
    }
    out << "time";
    for (const auto& ts : series) out << ',' << ts.name;
    out << '\n';
    for (const auto& [time, cells] : rows) {
        out << format_number(time);
        for (const double* v : cells) {
            out << ',';
            if (v != nullptr) out << format_number(*v);
        }
        out << '\n';
    }
}

}  // namespace sddnn

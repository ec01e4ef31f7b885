#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sddnn {

inline constexpr double kDefaultClampEps = 1e-6;

struct SessionScore {
    std::string session_id;
    std::vector<double> frame_scores;
    std::vector<double> frame_times;
    double aggregate = 0.0;

    std::size_t length() const { return frame_scores.size(); }
};

/// Geometric mean of the frame scores after clamping each to [eps, 1 - eps]:
/// Q = exp(mean(log q)).
double aggregate_session(std::span<const double> frame_scores, double clamp_eps = kDefaultClampEps);

struct LabeledScore {
    double score = 0.0;
    int label = 0;
};

struct ThresholdModel {
    double threshold = 0.5;
    double training_error = 0.0;
};

/// Classification error of the rule `predict 1 iff Q > threshold`.
double threshold_error(std::span<const LabeledScore> data, double threshold);

/// Candidate thresholds: midpoints between consecutive distinct scores plus one
/// sentinel below the minimum and one above the maximum, ascending.
std::vector<double> threshold_candidates(std::span<const LabeledScore> data);

/// Minimum-error candidate, smallest on ties. Throws ConfigError unless both labels occur.
ThresholdModel fit_threshold(std::span<const LabeledScore> data);

inline int classify(double score, const ThresholdModel& model) { return score > model.threshold ? 1 : 0; }

double accuracy(std::span<const int> predictions, std::span<const int> labels);

struct TrajectorySeries {
    std::string name;
    std::vector<double> times;
    std::vector<double> scores;
};

/// Writes `time,<name1>,<name2>,...` with one row per distinct frame time across
/// all series; a series without a frame at that time leaves its cell blank.
/// Throws InputError unless every series has strictly increasing times.
void write_trajectory(std::ostream& out, std::span<const TrajectorySeries> series);

}  // namespace sddnn

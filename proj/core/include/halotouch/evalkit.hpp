#pragma once

// Evaluation metrics: touch-down precision/recall/F1 with time-window event
// matching, spatial accuracy with global-offset removal and 3-sigma outlier
// rejection, touch point threshold, hover/pressure MAE, text-entry metrics
// (WPM, AWPM, UER, CER), and characterization envelope checks.

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/mpisim.hpp"

namespace halotouch::evalkit {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MatchReport {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double pairing_window_ms = 200.0;
};

MatchReport match_events(const std::vector<double>& detected_ms,
                         const std::vector<double>& truth_ms,
                         double window_ms = 200.0);

struct Point2 {
    double x = 0.0, y = 0.0;
};

struct Ellipse95 {
    Point2 center;
    double semi_major = 0.0;
    double semi_minor = 0.0;
    double angle_deg = 0.0;
};

struct SpatialReport {
    Point2 global_offset;           // mean(detected - target), subtracted
    double mean_euclidean_error = 0.0;
    double sd = 0.0;
    int outliers_removed = 0;
    std::vector<Ellipse95> ellipses;  // one per distinct target
};

SpatialReport spatial_accuracy(const std::vector<std::pair<Point2, Point2>>& pairs);

// Mean over key events (after the first) of the maximum ground-truth hover
// reached between consecutive contacts.
double touch_point_threshold(const std::vector<double>& truth_hover_mm,
                             const std::vector<bool>& truth_contact,
                             const std::vector<uint32_t>& key_frames);

struct MaeReport {
    double mae = 0.0;
    std::map<double, double> per_target;  // target value -> MAE
};

MaeReport hover_pressure_mae(const std::vector<double>& predicted,
                             const std::vector<double>& truth_targets);

struct Keystroke {
    double t_ms = 0.0;
    std::string key;  // single character, "DEL", or "SPACE"
};

struct SentenceLog {
    std::string reference;
    std::string input;
    std::vector<Keystroke> keystrokes;
};

struct SentenceRow {
    double wpm = 0.0;
    double accuracy = 0.0;
    int uncorrected_errors = 0;
    int corrected_errors = 0;
    int total_chars = 0;
};

struct TypingReport {
    double wpm = 0.0;
    double accuracy = 0.0;
    double awpm = 0.0;  // wpm * accuracy
    double uer = 0.0;
    double cer = 0.0;
    std::vector<SentenceRow> per_sentence;
};

TypingReport typing_metrics(const std::vector<SentenceLog>& sentences);

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<PropertyResult> characterization_report(
    const std::vector<mpisim::CharacterizationRow>& rows);

}  // namespace halotouch::evalkit

#pragma once

// Four-state calibration capture, sweep-task fine-tuning, and the signal
// corrector that normalizes raw halo strength via the trained regressor.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/gbrt.hpp"
#include "halotouch/halocore.hpp"

namespace halotouch::calib {

using halocore::HaloSample;

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegeneratePoseError : CalibrationError {
    using CalibrationError::CalibrationError;
};

struct StateAnchors {
    double hover = 0.0;
    double subtle = 0.0;
    double touch = 0.0;
    double pressure = 0.0;
};

struct CalibrationProfile {
    std::string user_id = "default";
    std::string material = "paper";
    StateAnchors anchors;            // strictly increasing hover -> pressure
    gbrt::GbrtModel corrector;
    double reference_strength = 0.0;
    double hover_height_mm = 10.0;   // heights held during the hover/subtle states
    double subtle_height_mm = 1.0;
    double line_count_ref = 0.0;     // median fingertip-fingerdip line count
                                     // during the hover state, for far hover
    bool fine_tuned = false;
    std::string created_at;
};

// Pose used to anchor the corrected-signal scale: frame center, 45 degree
// support angle, finger pointing along +x.
std::vector<double> reference_features();

constexpr double kPredictionEpsilonFrac = 0.01;  // of reference_strength

double correct(const HaloSample& sample, const gbrt::GbrtModel& corrector,
               double reference_strength);

struct AnchorCapture {
    double anchor = 0.0;      // median of the window
    double dispersion = 0.0;  // median absolute deviation / median
};

AnchorCapture capture_state(const std::vector<double>& corrected_window,
                            const std::string& state_label);

struct CalibrationSegments {
    // Frame-index ranges [begin, end) into the calibration stream.
    std::pair<uint32_t, uint32_t> background{0, 60};
    std::optional<std::pair<uint32_t, uint32_t>> sweep;
    std::map<std::string, std::pair<uint32_t, uint32_t>> states;  // the four labels
};

struct CalibrationInput {
    std::vector<HaloSample> samples;       // extracted per-frame, stream order
    std::vector<int> line_counts;          // parallel to samples
    CalibrationSegments segments;
};

CalibrationProfile run_calibration(const CalibrationInput& input,
                                   const gbrt::GbrtModel& pilot_corrector,
                                   int fine_tune_iterations = 50,
                                   const std::string& user_id = "default",
                                   const std::string& material = "paper");

void save_profile(const CalibrationProfile& profile, const std::string& dir);
CalibrationProfile load_profile(const std::string& dir);

}  // namespace halotouch::calib

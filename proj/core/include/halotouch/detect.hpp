#pragma once

// Runtime touch detection: linear interpolation of corrected strength into
// hover distance and pressure, an adaptive-baseline + derivative touch-down
// classifier, the five-state machine, and the typing debouncer.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/calib.hpp"

namespace halotouch::detect {

struct DetectError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TouchState { Idle, Hover, Subtle, Touch, Pressure };
const char* to_string(TouchState s);

struct DetectorConfig {
    double baseline_alpha = 0.9;   // exponential smoothing weight on history
    double delta_threshold = 0.5;  // fraction of the subtle-touch anchor gap
    double derivative_min = 0.1;   // fraction of the gap, per frame
    double hover_far_min_mm = 10.0;
    double hover_far_max_mm = 15.0;
    double hysteresis = 0.1;       // fraction of each adjacent anchor gap
};

struct TouchEvent {
    enum class Kind { Down, Up, Key };
    Kind kind = Kind::Down;
    uint32_t frame_index = 0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    double pressure = 0.0;      // down events only
    uint32_t latency_frames = 1;
};

struct TraceRecord {
    uint32_t frame_index = 0;
    double corrected = 0.0;
    double interpolated = 0.0;  // classifier input, subtle anchor = 0, touch = 1
    double baseline = 0.0;
    double derivative = 0.0;
    TouchState state = TouchState::Idle;
    double hover_mm = 0.0;
    double pressure = 0.0;
    bool landmarks_missing = false;
};

// Eq-style linear interpolation between calibrated anchors.
double interpolate(double x, double x_min, double x_max, double y_min,
                   double y_max, bool clamp = false);

struct ClassifyResult {
    bool touch_down = false;
    double new_baseline = 0.0;
};

ClassifyResult classify_touch(double value, double prev_value, double baseline,
                              double gap, const DetectorConfig& cfg,
                              bool in_contact);

struct StepInput {
    uint32_t frame_index = 0;
    double corrected = 0.0;
    double x_mm = 0.0;
    double y_mm = 0.0;
    int line_count = 0;
    bool landmarks_missing = false;
};

class Detector {
  public:
    Detector(const calib::CalibrationProfile& profile, DetectorConfig cfg = {});

    TraceRecord step(const StepInput& in, std::vector<TouchEvent>& events_out);

    TouchState state() const { return state_; }

  private:
    calib::CalibrationProfile profile_;
    DetectorConfig cfg_;
    TouchState state_ = TouchState::Idle;
    double baseline_ = 0.0;
    double prev_value_ = 0.0;
    bool have_prev_ = false;
    bool down_armed_ = true;   // re-armed by the up event
    bool classifier_fired_ = false;
};

// One key per down..up pair whose end is confirmed by a following no-touch
// observation; unterminated downs are dropped.
std::vector<TouchEvent> debounce(const std::vector<TouchEvent>& events,
                                 std::vector<std::string>* trace_notes = nullptr);

void write_events_csv(const std::vector<TouchEvent>& events, const std::string& path);
std::vector<TouchEvent> read_events_csv(const std::string& path);
void write_trace_csv(const std::vector<TraceRecord>& trace, const std::string& path);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

}  // namespace halotouch::detect

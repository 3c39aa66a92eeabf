#include "halotouch/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace halotouch::detect {

const char* to_string(TouchState s) {
    switch (s) {
        case TouchState::Idle: return "idle";
        case TouchState::Hover: return "hover";
        case TouchState::Subtle: return "subtle";
        case TouchState::Touch: return "touch";
        case TouchState::Pressure: return "pressure";
    }
    return "?";
}

double interpolate(double x, double x_min, double x_max, double y_min,
                   double y_max, bool clamp) {
    if (x_max == x_min)
        throw DetectError("interpolate: degenerate anchors (x_max == x_min)");
    double y = y_min + (x - x_min) / (x_max - x_min) * (y_max - y_min);
    if (clamp) y = std::clamp(y, std::min(y_min, y_max), std::max(y_min, y_max));
    return y;
}

ClassifyResult classify_touch(double value, double prev_value, double baseline,
                              double gap, const DetectorConfig& cfg,
                              bool in_contact) {
    ClassifyResult r;
    const double deviation = std::abs(value - baseline);
    const double derivative = value - prev_value;
    r.touch_down = deviation > cfg.delta_threshold * gap &&
                   derivative >= cfg.derivative_min * gap;
    // Baseline freezes during contact so a sustained press is not absorbed.
    r.new_baseline = in_contact
                         ? baseline
                         : cfg.baseline_alpha * baseline +
                               (1.0 - cfg.baseline_alpha) * value;
    return r;
}

Detector::Detector(const calib::CalibrationProfile& profile, DetectorConfig cfg)
    : profile_(profile), cfg_(cfg) {
    const auto& a = profile_.anchors;
    if (!(a.hover < a.subtle && a.subtle < a.touch && a.touch < a.pressure))
        throw DetectError("detector: profile anchors not strictly increasing");
    baseline_ = interpolate(0.0, a.subtle, a.touch, 0.0, 1.0);
}

TraceRecord Detector::step(const StepInput& in, std::vector<TouchEvent>& events_out) {
    TraceRecord rec;
    rec.frame_index = in.frame_index;
    rec.state = state_;
    rec.baseline = baseline_;

    if (in.landmarks_missing) {
        // State frozen; flagged record, no baseline drift on missing data.
        rec.landmarks_missing = true;
        rec.interpolated = prev_value_;
        return rec;
    }

    const auto& a = profile_.anchors;
    const double x = in.corrected;
    const double value = interpolate(x, a.subtle, a.touch, 0.0, 1.0);
    const bool in_contact =
        state_ == TouchState::Touch || state_ == TouchState::Pressure;

    const double prev = have_prev_ ? prev_value_ : value;
    const auto cls = classify_touch(value, prev, baseline_, 1.0, cfg_, in_contact);
    if (cls.touch_down && !in_contact) classifier_fired_ = true;

    // State ladder with hysteresis bands around the anchor midpoints.
    const double bounds[4] = {a.hover / 2.0, (a.hover + a.subtle) / 2.0,
                              (a.subtle + a.touch) / 2.0,
                              (a.touch + a.pressure) / 2.0};
    const double gaps[4] = {a.hover, a.subtle - a.hover, a.touch - a.subtle,
                            a.pressure - a.touch};
    int level = int(state_);
    while (level < 4 && x > bounds[level] + cfg_.hysteresis * gaps[level]) ++level;
    while (level > 0 && x < bounds[level - 1] - cfg_.hysteresis * gaps[level - 1])
        --level;
    state_ = TouchState(level);
    const bool contact_now =
        state_ == TouchState::Touch || state_ == TouchState::Pressure;

    rec.corrected = x;
    rec.interpolated = value;
    rec.derivative = value - prev;
    rec.state = state_;

    rec.pressure = contact_now
                       ? interpolate(x, a.touch, a.pressure, 0.0, 1.0, true)
                       : 0.0;
    if (contact_now) {
        rec.hover_mm = 0.0;
    } else if (x >= a.hover) {
        rec.hover_mm = interpolate(x, a.hover, a.subtle, profile_.hover_height_mm,
                                   profile_.subtle_height_mm, true);
    } else if (profile_.line_count_ref > 0.0) {
        // Far hover: read out how many interference pixels survive on the
        // fingertip-fingerdip line.
        rec.hover_mm = interpolate(double(in.line_count), 0.0,
                                   profile_.line_count_ref, cfg_.hover_far_max_mm,
                                   cfg_.hover_far_min_mm, true);
    } else {
        rec.hover_mm = cfg_.hover_far_max_mm;
    }

    if (contact_now && down_armed_ && classifier_fired_) {
        events_out.push_back({TouchEvent::Kind::Down, in.frame_index, in.x_mm,
                              in.y_mm, rec.pressure, 1});
        down_armed_ = false;
        classifier_fired_ = false;
    }
    if (!down_armed_ && x < a.subtle) {
        events_out.push_back(
            {TouchEvent::Kind::Up, in.frame_index, in.x_mm, in.y_mm, 0.0, 1});
        down_armed_ = true;
        classifier_fired_ = false;
    }
    if (!contact_now && !cls.touch_down) classifier_fired_ = false;

    baseline_ = cls.new_baseline;
    prev_value_ = value;
    have_prev_ = true;
    return rec;
}

std::vector<TouchEvent> debounce(const std::vector<TouchEvent>& events,
                                 std::vector<std::string>* trace_notes) {
    std::vector<TouchEvent> keys;
    std::optional<TouchEvent> pending_down;
    auto note = [&](const std::string& msg) {
        if (trace_notes) trace_notes->push_back(msg);
    };
    for (const auto& e : events) {
        if (e.kind == TouchEvent::Kind::Down) {
            if (pending_down)
                note("dropped down at frame " +
                     std::to_string(pending_down->frame_index) + " without up");
            pending_down = e;
        } else if (e.kind == TouchEvent::Kind::Up) {
            if (!pending_down) {
                note("dropped up at frame " + std::to_string(e.frame_index) +
                     " without down");
                continue;
            }
            // The up observation is the no-touch detection that closes the
            // pair; the key lands one frame later.
            TouchEvent key = *pending_down;
            key.kind = TouchEvent::Kind::Key;
            key.frame_index = e.frame_index;
            key.latency_frames = 2;
            keys.push_back(key);
            pending_down.reset();
        }
    }
    if (pending_down)
        note("dropped unterminated down at frame " +
             std::to_string(pending_down->frame_index));
    return keys;
}

namespace {
const char* kind_name(TouchEvent::Kind k) {
    switch (k) {
        case TouchEvent::Kind::Down: return "down";
        case TouchEvent::Kind::Up: return "up";
        case TouchEvent::Kind::Key: return "key";
    }
    return "?";
}
}  // namespace

void write_events_csv(const std::vector<TouchEvent>& events, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DetectError("cannot open for writing: " + path);
    out << "frame,kind,x_mm,y_mm,pressure\n";
    for (const auto& e : events)
        out << e.frame_index << ',' << kind_name(e.kind) << ',' << e.x_mm << ','
            << e.y_mm << ',' << e.pressure << '\n';
}

std::vector<TouchEvent> read_events_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DetectError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "frame,kind,x_mm,y_mm,pressure")
        throw DetectError("events CSV: bad or missing header");
    std::vector<TouchEvent> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string frame, kind, x, y, p;
        if (!std::getline(ss, frame, ',') || !std::getline(ss, kind, ',') ||
            !std::getline(ss, x, ',') || !std::getline(ss, y, ',') ||
            !std::getline(ss, p))
            throw DetectError("events CSV: malformed row: " + line);
        TouchEvent e;
        e.frame_index = uint32_t(std::stoul(frame));
        if (kind == "down") e.kind = TouchEvent::Kind::Down;
        else if (kind == "up") e.kind = TouchEvent::Kind::Up;
        else if (kind == "key") e.kind = TouchEvent::Kind::Key;
        else throw DetectError("events CSV: unknown kind: " + kind);
        e.x_mm = std::stod(x);
        e.y_mm = std::stod(y);
        e.pressure = std::stod(p);
        out.push_back(e);
    }
    return out;
}

void write_trace_csv(const std::vector<TraceRecord>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DetectError("cannot open for writing: " + path);
    out << "frame,corrected,interpolated,baseline,derivative,state,hover_mm,"
           "pressure,landmarks_missing\n";
    for (const auto& r : trace)
        out << r.frame_index << ',' << r.corrected << ',' << r.interpolated << ','
            << r.baseline << ',' << r.derivative << ',' << to_string(r.state)
            << ',' << r.hover_mm << ',' << r.pressure << ','
            << (r.landmarks_missing ? 1 : 0) << '\n';
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DetectError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "frame,corrected,interpolated,baseline,derivative,state,hover_mm,"
                "pressure,landmarks_missing")
        throw DetectError("trace CSV: bad or missing header");
    std::vector<TraceRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[9];
        for (int i = 0; i < 9; ++i)
            if (!std::getline(ss, f[i], i == 8 ? '\n' : ','))
                throw DetectError("trace CSV: malformed row: " + line);
        TraceRecord r;
        r.frame_index = uint32_t(std::stoul(f[0]));
        r.corrected = std::stod(f[1]);
        r.interpolated = std::stod(f[2]);
        r.baseline = std::stod(f[3]);
        r.derivative = std::stod(f[4]);
        if (f[5] == "idle") r.state = TouchState::Idle;
        else if (f[5] == "hover") r.state = TouchState::Hover;
        else if (f[5] == "subtle") r.state = TouchState::Subtle;
        else if (f[5] == "touch") r.state = TouchState::Touch;
        else if (f[5] == "pressure") r.state = TouchState::Pressure;
        else throw DetectError("trace CSV: unknown state: " + f[5]);
        r.hover_mm = std::stod(f[6]);
        r.pressure = std::stod(f[7]);
        r.landmarks_missing = f[8] == "1";
        out.push_back(r);
    }
    return out;
}

}  // namespace halotouch::detect

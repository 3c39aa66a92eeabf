#include "halotouch/calib.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace halotouch::calib {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

std::vector<double> features_of(const HaloSample& s) {
    return {s.x_mm, s.y_mm, s.pitch_deg, s.yaw_deg};
}

}  // namespace

std::vector<double> reference_features() { return {0.0, 0.0, 45.0, 0.0}; }

double correct(const HaloSample& sample, const gbrt::GbrtModel& corrector,
               double reference_strength) {
    const double predicted = gbrt::predict(corrector, features_of(sample));
    if (predicted < kPredictionEpsilonFrac * reference_strength)
        throw DegeneratePoseError(
            "correct: predicted strength below epsilon at pose (x=" +
            std::to_string(sample.x_mm) + ", y=" + std::to_string(sample.y_mm) +
            ", pitch=" + std::to_string(sample.pitch_deg) + ")");
    return sample.raw_strength * reference_strength / predicted;
}

AnchorCapture capture_state(const std::vector<double>& corrected_window,
                            const std::string& state_label) {
    if (corrected_window.size() < 30)
        throw CalibrationError("capture_state(" + state_label +
                               "): window too short (" +
                               std::to_string(corrected_window.size()) + " < 30)");
    AnchorCapture cap;
    cap.anchor = median(corrected_window);
    std::vector<double> dev;
    dev.reserve(corrected_window.size());
    for (double v : corrected_window) dev.push_back(std::abs(v - cap.anchor));
    cap.dispersion = cap.anchor != 0.0 ? median(dev) / std::abs(cap.anchor) : 0.0;
    if (cap.dispersion > 0.25)
        throw CalibrationError("capture_state(" + state_label +
                               "): unstable capture, dispersion " +
                               std::to_string(cap.dispersion));
    return cap;
}

CalibrationProfile run_calibration(const CalibrationInput& input,
                                   const gbrt::GbrtModel& pilot_corrector,
                                   int fine_tune_iterations,
                                   const std::string& user_id,
                                   const std::string& material) {
    CalibrationProfile profile;
    profile.user_id = user_id;
    profile.material = material;
    profile.created_at = now_iso8601();
    profile.corrector = pilot_corrector;

    auto in_segment = [](const HaloSample& s, std::pair<uint32_t, uint32_t> seg) {
        return s.frame_index >= seg.first && s.frame_index < seg.second;
    };

    if (input.segments.sweep) {
        gbrt::TrainingSet sweep;
        for (const auto& s : input.samples) {
            if (!in_segment(s, *input.segments.sweep)) continue;
            sweep.features.push_back(features_of(s));
            sweep.targets.push_back(s.raw_strength);
        }
        if (!sweep.features.empty()) {
            profile.corrector = gbrt::warm_start_update(
                pilot_corrector, sweep, fine_tune_iterations);
            profile.fine_tuned = true;
        }
    }

    profile.reference_strength =
        gbrt::predict(profile.corrector, reference_features());

    int degenerate = 0, corrected_total = 0;
    std::map<std::string, std::vector<double>> windows;
    std::vector<double> hover_counts;
    for (const auto& s : input.samples) {
        for (const auto& [label, seg] : input.segments.states) {
            if (!in_segment(s, seg)) continue;
            ++corrected_total;
            try {
                windows[label].push_back(
                    correct(s, profile.corrector, profile.reference_strength));
            } catch (const DegeneratePoseError&) {
                ++degenerate;
            }
            if (label == "hover" && !input.line_counts.empty()) {
                const size_t i = &s - input.samples.data();
                if (i < input.line_counts.size())
                    hover_counts.push_back(double(input.line_counts[i]));
            }
        }
    }
    if (corrected_total > 0 && degenerate > corrected_total / 2)
        throw CalibrationError(
            "calibration failed: degenerate-pose errors dominate (" +
            std::to_string(degenerate) + "/" + std::to_string(corrected_total) +
            "); support angle likely outside the usable range");

    const std::vector<std::string> order = {"hover", "subtle", "touch", "pressure"};
    std::vector<double> anchors;
    for (const auto& label : order) {
        auto it = windows.find(label);
        if (it == windows.end())
            throw CalibrationError("calibration stream missing the " + label +
                                   " state segment");
        anchors.push_back(capture_state(it->second, label).anchor);
    }
    for (size_t i = 1; i < anchors.size(); ++i)
        if (!(anchors[i - 1] < anchors[i]))
            throw CalibrationError("calibration failed: anchor ordering violated (" +
                                   order[i - 1] + " >= " + order[i] + ")");
    profile.anchors = {anchors[0], anchors[1], anchors[2], anchors[3]};
    profile.line_count_ref = median(hover_counts);
    return profile;
}

void save_profile(const CalibrationProfile& profile, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    gbrt::save_model(profile.corrector, (fs::path(dir) / "corrector.htgb").string());

    nlohmann::json j;
    j["user_id"] = profile.user_id;
    j["material"] = profile.material;
    j["anchors"] = {{"hover", profile.anchors.hover},
                    {"subtle", profile.anchors.subtle},
                    {"touch", profile.anchors.touch},
                    {"pressure", profile.anchors.pressure}};
    j["reference_strength"] = profile.reference_strength;
    j["hover_height_mm"] = profile.hover_height_mm;
    j["subtle_height_mm"] = profile.subtle_height_mm;
    j["line_count_ref"] = profile.line_count_ref;
    j["fine_tuned"] = profile.fine_tuned;
    j["created_at"] = profile.created_at;
    j["corrector_file"] = "corrector.htgb";
    std::ofstream out(fs::path(dir) / "profile.json");
    if (!out) throw CalibrationError("cannot write profile to " + dir);
    out << j.dump(2) << '\n';
}

CalibrationProfile load_profile(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "profile.json");
    if (!in) throw CalibrationError("cannot read profile from " + dir);
    nlohmann::json j;
    in >> j;

    CalibrationProfile p;
    p.user_id = j.at("user_id");
    p.material = j.at("material");
    p.anchors.hover = j.at("anchors").at("hover");
    p.anchors.subtle = j.at("anchors").at("subtle");
    p.anchors.touch = j.at("anchors").at("touch");
    p.anchors.pressure = j.at("anchors").at("pressure");
    p.reference_strength = j.at("reference_strength");
    p.hover_height_mm = j.at("hover_height_mm");
    p.subtle_height_mm = j.at("subtle_height_mm");
    p.line_count_ref = j.at("line_count_ref");
    p.fine_tuned = j.at("fine_tuned");
    p.created_at = j.at("created_at");
    p.corrector = gbrt::load_model(
        (fs::path(dir) / std::string(j.at("corrector_file"))).string());

    if (!(p.anchors.hover < p.anchors.subtle && p.anchors.subtle < p.anchors.touch &&
          p.anchors.touch < p.anchors.pressure))
        throw CalibrationError("profile " + dir + ": anchor ordering violated");
    return p;
}

}  // namespace halotouch::calib

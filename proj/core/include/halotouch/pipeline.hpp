#pragma once

// Composed runs: scenario scripts (scene + keyframes + optional calibration
// segment boundaries), simulate-to-files, the background -> reveal ->
// extract -> correct -> detect frame loop, and run manifests.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/calib.hpp"
#include "halotouch/detect.hpp"
#include "halotouch/mpisim.hpp"

namespace halotouch::pipeline {

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kBackgroundFrames = 60;
inline constexpr char kToolVersion[] = "halotouch 0.1.0";

// JSON scenario file: {"scene": {...}, "fps": 30, "keyframes": [...],
// "segments": {...}?}. Every scene field is optional and defaulted.
struct ScenarioScript {
    mpisim::SceneSpec scene;
    double fps = 30.0;
    std::vector<mpisim::Keyframe> keyframes;
    bool has_segments = false;
    calib::CalibrationSegments segments;
};

ScenarioScript load_scenario(const std::string& path);
void save_scenario(const ScenarioScript& script, const std::string& path);

void write_truth_csv(const std::vector<mpisim::GroundTruthRecord>& truth,
                     const std::string& path);
std::vector<mpisim::GroundTruthRecord> read_truth_csv(const std::string& path);

// Landmark sidecar rows for the frames where the finger is present.
std::vector<halocore::LandmarkFrame> landmarks_from_truth(
    const std::vector<mpisim::GroundTruthRecord>& truth);

struct SimulateResult {
    std::string stream_path;
    std::string landmarks_path;
    std::string truth_path;
    uint32_t frame_count = 0;
};

SimulateResult simulate_to_files(const ScenarioScript& script, uint64_t seed,
                                 const std::string& out_dir,
                                 const std::string& stem = "scenario");

struct ExtractedFrame {
    uint32_t frame_index = 0;
    bool landmarks_missing = false;
    bool extraction_failed = false;
    halocore::HaloSample sample;
    int line_count = 0;
};

struct ExtractionSeries {
    depthio::BackgroundModel background;
    std::vector<ExtractedFrame> frames;   // stream order, after the bg window
    std::vector<std::string> notes;       // per-frame failures, non-fatal
};

ExtractionSeries extract_series(const std::vector<depthio::DepthFrame>& frames,
                                const std::vector<halocore::LandmarkFrame>& landmarks,
                                const depthio::CameraPose& camera,
                                double threshold = halocore::kDefaultThreshold);

// Repackages an extraction series for calib::run_calibration.
calib::CalibrationInput build_calibration_input(const ExtractionSeries& series,
                                                const calib::CalibrationSegments& segments);

struct RunResult {
    std::vector<detect::TouchEvent> events;  // raw down/up stream
    std::vector<detect::TouchEvent> keys;    // debounced
    std::vector<detect::TraceRecord> trace;
    std::vector<std::string> notes;
    uint32_t latency_frames = 2;  // landmark frame + confirming no-touch frame
};

RunResult run_pipeline(const std::vector<depthio::DepthFrame>& frames,
                       const std::vector<halocore::LandmarkFrame>& landmarks,
                       const depthio::CameraPose& camera,
                       const calib::CalibrationProfile& profile,
                       const detect::DetectorConfig& cfg = {},
                       double threshold = halocore::kDefaultThreshold);

struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    uint64_t seed = 0;
    std::map<std::string, std::string> config;   // effective overrides
    std::map<std::string, double> stats;         // e.g. latency accounting
    std::string tool_version = kToolVersion;
};

void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace halotouch::pipeline

#include "halotouch/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace halotouch::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

mpisim::FingerPose finger_from_json(const json& j) {
    mpisim::FingerPose p;
    p.x_mm = j.value("x_mm", 0.0);
    p.y_mm = j.value("y_mm", 0.0);
    p.hover_mm = j.value("hover_mm", 0.0);
    p.pressure = j.value("pressure", 0.0);
    p.pitch_deg = j.value("pitch_deg", 45.0);
    p.yaw_deg = j.value("yaw_deg", 0.0);
    return p;
}

json finger_to_json(const mpisim::FingerPose& p) {
    return {{"x_mm", p.x_mm},         {"y_mm", p.y_mm},
            {"hover_mm", p.hover_mm}, {"pressure", p.pressure},
            {"pitch_deg", p.pitch_deg}, {"yaw_deg", p.yaw_deg}};
}

std::pair<uint32_t, uint32_t> range_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2)
        throw PipelineError("scenario: segment range must be [begin, end)");
    return {j[0].get<uint32_t>(), j[1].get<uint32_t>()};
}

}  // namespace

ScenarioScript load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot read scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw PipelineError("scenario " + path + ": " + e.what());
    }

    ScenarioScript s;
    if (j.contains("scene")) {
        const json& sc = j["scene"];
        s.scene.surface_z_mm = sc.value("surface_z_mm", 500.0);
        s.scene.material = mpisim::material_preset(sc.value("material", "paper"));
        s.scene.modulation_hz = sc.value("modulation_hz", 50e6);
        s.scene.noise_sigma_mm = sc.value("noise_sigma_mm", 2.0);
        s.scene.global_mpi_gain = sc.value("global_mpi_gain", 1.0);
        s.scene.landmark_jitter_px = sc.value("landmark_jitter_px", 0.0);
        s.scene.width = sc.value("width", 640);
        s.scene.height = sc.value("height", 576);
        if (sc.contains("camera")) {
            const json& cam = sc["camera"];
            s.scene.camera.z_m = cam.value("z_m", 0.5);
            s.scene.camera.yaw_deg = cam.value("yaw_deg", 0.0);
            s.scene.camera.pitch_deg = cam.value("pitch_deg", 0.0);
        }
    }
    s.fps = j.value("fps", 30.0);
    if (s.fps <= 0) throw PipelineError("scenario: fps must be positive");

    if (!j.contains("keyframes") || !j["keyframes"].is_array() ||
        j["keyframes"].empty())
        throw PipelineError("scenario " + path + ": keyframes missing or empty");
    for (const json& kf : j["keyframes"]) {
        mpisim::Keyframe k;
        k.t_s = kf.at("t").get<double>();
        if (kf.contains("finger") && !kf["finger"].is_null())
            k.finger = finger_from_json(kf["finger"]);
        s.keyframes.push_back(std::move(k));
    }

    if (j.contains("segments")) {
        const json& seg = j["segments"];
        s.has_segments = true;
        if (seg.contains("background"))
            s.segments.background = range_from_json(seg["background"]);
        if (seg.contains("sweep"))
            s.segments.sweep = range_from_json(seg["sweep"]);
        if (seg.contains("states"))
            for (const auto& [label, r] : seg["states"].items())
                s.segments.states[label] = range_from_json(r);
    }
    return s;
}

void save_scenario(const ScenarioScript& script, const std::string& path) {
    json j;
    j["scene"] = {{"surface_z_mm", script.scene.surface_z_mm},
                  {"material", script.scene.material.name},
                  {"camera",
                   {{"z_m", script.scene.camera.z_m},
                    {"yaw_deg", script.scene.camera.yaw_deg},
                    {"pitch_deg", script.scene.camera.pitch_deg}}},
                  {"modulation_hz", script.scene.modulation_hz},
                  {"noise_sigma_mm", script.scene.noise_sigma_mm},
                  {"global_mpi_gain", script.scene.global_mpi_gain},
                  {"landmark_jitter_px", script.scene.landmark_jitter_px},
                  {"width", script.scene.width},
                  {"height", script.scene.height}};
    j["fps"] = script.fps;
    j["keyframes"] = json::array();
    for (const auto& k : script.keyframes) {
        json kf = {{"t", k.t_s}};
        if (k.finger) kf["finger"] = finger_to_json(*k.finger);
        j["keyframes"].push_back(std::move(kf));
    }
    if (script.has_segments) {
        json seg;
        seg["background"] = {script.segments.background.first,
                             script.segments.background.second};
        if (script.segments.sweep)
            seg["sweep"] = {script.segments.sweep->first,
                            script.segments.sweep->second};
        json states;
        for (const auto& [label, r] : script.segments.states)
            states[label] = {r.first, r.second};
        seg["states"] = std::move(states);
        j["segments"] = std::move(seg);
    }
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write scenario file: " + path);
    out << j.dump(2) << '\n';
}

static const char kTruthHeader[] =
    "frame,present,contact,x_mm,y_mm,hover_mm,pressure,pitch_deg,yaw_deg,"
    "tip_u,tip_v,tip_z,dip_u,dip_v,dip_z";

void write_truth_csv(const std::vector<mpisim::GroundTruthRecord>& truth,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot open for writing: " + path);
    out << kTruthHeader << '\n';
    for (const auto& t : truth)
        out << t.frame_index << ',' << (t.finger_present ? 1 : 0) << ','
            << (t.contact ? 1 : 0) << ',' << t.pose.x_mm << ',' << t.pose.y_mm
            << ',' << t.pose.hover_mm << ',' << t.ground_pressure << ','
            << t.pose.pitch_deg << ',' << t.pose.yaw_deg << ','
            << t.fingertip.u << ',' << t.fingertip.v << ',' << t.fingertip.z_mm
            << ',' << t.fingerdip.u << ',' << t.fingerdip.v << ','
            << t.fingerdip.z_mm << '\n';
}

std::vector<mpisim::GroundTruthRecord> read_truth_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kTruthHeader)
        throw PipelineError("truth CSV: bad or missing header");
    std::vector<mpisim::GroundTruthRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[15];
        for (int i = 0; i < 15; ++i)
            if (!std::getline(ss, f[i], i == 14 ? '\n' : ','))
                throw PipelineError("truth CSV: malformed row: " + line);
        mpisim::GroundTruthRecord r;
        r.frame_index = uint32_t(std::stoul(f[0]));
        r.finger_present = f[1] == "1";
        r.contact = f[2] == "1";
        r.pose.x_mm = std::stod(f[3]);
        r.pose.y_mm = std::stod(f[4]);
        r.pose.hover_mm = std::stod(f[5]);
        r.ground_pressure = std::stod(f[6]);
        r.pose.pressure = r.ground_pressure;
        r.pose.pitch_deg = std::stod(f[7]);
        r.pose.yaw_deg = std::stod(f[8]);
        r.fingertip = {std::stod(f[9]), std::stod(f[10]), std::stod(f[11])};
        r.fingerdip = {std::stod(f[12]), std::stod(f[13]), std::stod(f[14])};
        out.push_back(r);
    }
    return out;
}

std::vector<halocore::LandmarkFrame> landmarks_from_truth(
    const std::vector<mpisim::GroundTruthRecord>& truth) {
    std::vector<halocore::LandmarkFrame> out;
    for (const auto& t : truth) {
        if (!t.finger_present) continue;
        halocore::LandmarkFrame lm;
        lm.frame_index = t.frame_index;
        lm.tip_u = t.fingertip.u;
        lm.tip_v = t.fingertip.v;
        lm.tip_z_mm = t.fingertip.z_mm;
        lm.dip_u = t.fingerdip.u;
        lm.dip_v = t.fingerdip.v;
        lm.dip_z_mm = t.fingerdip.z_mm;
        out.push_back(lm);
    }
    return out;
}

SimulateResult simulate_to_files(const ScenarioScript& script, uint64_t seed,
                                 const std::string& out_dir,
                                 const std::string& stem) {
    fs::create_directories(out_dir);
    const auto traj =
        mpisim::render_trajectory(script.scene, script.keyframes, script.fps, seed);

    depthio::StreamHeader header;
    header.width = uint16_t(script.scene.width);
    header.height = uint16_t(script.scene.height);
    header.nominal_fps = float(script.fps);
    header.camera_pose = script.scene.camera;

    SimulateResult r;
    r.stream_path = (fs::path(out_dir) / (stem + ".htds")).string();
    r.landmarks_path = (fs::path(out_dir) / (stem + "_landmarks.csv")).string();
    r.truth_path = (fs::path(out_dir) / (stem + "_truth.csv")).string();
    r.frame_count = uint32_t(traj.frames.size());

    depthio::write_stream_file(traj.frames, header, r.stream_path);
    halocore::write_landmarks_csv(landmarks_from_truth(traj.truth), r.landmarks_path);
    write_truth_csv(traj.truth, r.truth_path);
    return r;
}

ExtractionSeries extract_series(const std::vector<depthio::DepthFrame>& frames,
                                const std::vector<halocore::LandmarkFrame>& landmarks,
                                const depthio::CameraPose& camera,
                                double threshold) {
    if (int(frames.size()) < kBackgroundFrames)
        throw PipelineError("stream too short: " + std::to_string(frames.size()) +
                            " frames, need " + std::to_string(kBackgroundFrames) +
                            " for the background model");

    ExtractionSeries series;
    series.background = depthio::build_background(
        {frames.begin(), frames.begin() + kBackgroundFrames});

    std::map<uint32_t, const halocore::LandmarkFrame*> by_frame;
    for (const auto& lm : landmarks) by_frame[lm.frame_index] = &lm;

    for (size_t i = kBackgroundFrames; i < frames.size(); ++i) {
        const auto& frame = frames[i];
        ExtractedFrame ef;
        ef.frame_index = frame.frame_index;
        const auto it = by_frame.find(frame.frame_index);
        if (it == by_frame.end()) {
            ef.landmarks_missing = true;
            series.frames.push_back(ef);
            continue;
        }
        try {
            const auto diff = depthio::subtract_background(frame, series.background);
            ef.sample = halocore::extract_sample(diff, *it->second, camera, threshold);
            ef.line_count =
                halocore::count_line_pixels(halocore::reveal(diff, threshold),
                                            *it->second);
        } catch (const std::exception& e) {
            ef.extraction_failed = true;
            series.notes.push_back("frame " + std::to_string(frame.frame_index) +
                                   ": " + e.what());
        }
        series.frames.push_back(ef);
    }
    return series;
}

calib::CalibrationInput build_calibration_input(
    const ExtractionSeries& series, const calib::CalibrationSegments& segments) {
    calib::CalibrationInput input;
    input.segments = segments;
    for (const auto& ef : series.frames) {
        if (ef.landmarks_missing || ef.extraction_failed) continue;
        input.samples.push_back(ef.sample);
        input.line_counts.push_back(ef.line_count);
    }
    return input;
}

RunResult run_pipeline(const std::vector<depthio::DepthFrame>& frames,
                       const std::vector<halocore::LandmarkFrame>& landmarks,
                       const depthio::CameraPose& camera,
                       const calib::CalibrationProfile& profile,
                       const detect::DetectorConfig& cfg, double threshold) {
    auto series = extract_series(frames, landmarks, camera, threshold);

    RunResult result;
    result.notes = std::move(series.notes);
    detect::Detector detector(profile, cfg);

    for (const auto& ef : series.frames) {
        detect::StepInput in;
        in.frame_index = ef.frame_index;
        if (ef.landmarks_missing || ef.extraction_failed) {
            in.landmarks_missing = true;
        } else {
            try {
                in.corrected = calib::correct(ef.sample, profile.corrector,
                                              profile.reference_strength);
                in.x_mm = ef.sample.x_mm;
                in.y_mm = ef.sample.y_mm;
                in.line_count = ef.line_count;
            } catch (const calib::DegeneratePoseError& e) {
                in.landmarks_missing = true;
                result.notes.push_back("frame " + std::to_string(ef.frame_index) +
                                       ": " + e.what());
            }
        }
        result.trace.push_back(detector.step(in, result.events));
    }
    result.keys = detect::debounce(result.events, &result.notes);
    return result;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    json j;
    j["subcommand"] = manifest.subcommand;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config;
    j["stats"] = manifest.stats;
    j["tool_version"] = manifest.tool_version;
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot read manifest: " + path);
    json j;
    in >> j;
    RunManifest m;
    m.subcommand = j.at("subcommand");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed");
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.stats = j.at("stats").get<std::map<std::string, double>>();
    m.tool_version = j.at("tool_version");
    return m;
}

}  // namespace halotouch::pipeline

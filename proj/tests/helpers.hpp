#pragma once

// Shared fixtures for the test suites: small scenes (geometry is defined in
// pixels, so reduced frames keep runtimes down without changing behavior),
// scripted sessions, and a cached calibration path.

#include <map>
#include <string>
#include <vector>

#include "halotouch/pipeline.hpp"

#ifndef HALOTOUCH_ASSETS_DIR
#define HALOTOUCH_ASSETS_DIR "assets"
#endif

namespace testutil {

using namespace halotouch;

inline std::string asset(const std::string& name) {
    return std::string(HALOTOUCH_ASSETS_DIR) + "/" + name;
}

inline mpisim::SceneSpec small_scene(const std::string& material = "paper") {
    mpisim::SceneSpec s;
    s.material = mpisim::material_preset(material);
    s.width = 192;
    s.height = 160;
    return s;
}

inline mpisim::FingerPose center_pose(double hover_mm, double pressure = 0.0,
                                      double x_mm = 0.0, double y_mm = 0.0) {
    mpisim::FingerPose p;
    p.x_mm = x_mm;
    p.y_mm = y_mm;
    p.hover_mm = hover_mm;
    p.pressure = pressure;
    return p;
}

inline halocore::LandmarkFrame landmarks_of(const mpisim::GroundTruthRecord& gt) {
    halocore::LandmarkFrame lm;
    lm.frame_index = gt.frame_index;
    lm.tip_u = gt.fingertip.u;
    lm.tip_v = gt.fingertip.v;
    lm.tip_z_mm = gt.fingertip.z_mm;
    lm.dip_u = gt.fingerdip.u;
    lm.dip_v = gt.fingerdip.v;
    lm.dip_z_mm = gt.fingerdip.z_mm;
    return lm;
}

// Renders one frame and extracts its halo sample against a noise-free
// background model of the same scene.
inline halocore::HaloSample extract_one(const mpisim::SceneSpec& scene,
                                        const mpisim::FingerPose& pose,
                                        uint64_t seed) {
    auto [frame, gt] = mpisim::render_frame(scene, pose, seed);
    depthio::BackgroundModel bg;
    bg.width = frame.width;
    bg.height = frame.height;
    bg.mean_depth.assign(frame.pixel_count(), scene.surface_z_mm);
    bg.valid_mask.assign(frame.pixel_count(), 1);
    bg.frames_used = 1;
    const auto diff = depthio::subtract_background(frame, bg);
    return halocore::extract_sample(diff, landmarks_of(gt), scene.camera);
}

struct SessionData {
    pipeline::ScenarioScript script;
    mpisim::Trajectory trajectory;
    pipeline::ExtractionSeries series;
};

inline SessionData render_session(const pipeline::ScenarioScript& script,
                                  uint64_t seed) {
    SessionData d;
    d.script = script;
    d.trajectory = mpisim::render_trajectory(script.scene, script.keyframes,
                                             script.fps, seed);
    std::vector<halocore::LandmarkFrame> lms;
    for (const auto& gt : d.trajectory.truth)
        if (gt.finger_present) lms.push_back(landmarks_of(gt));
    d.series = pipeline::extract_series(d.trajectory.frames, lms,
                                        script.scene.camera);
    return d;
}

inline gbrt::TrainingSet sweep_training_set(const SessionData& d) {
    gbrt::TrainingSet set;
    const auto sweep = *d.script.segments.sweep;
    for (const auto& ef : d.series.frames) {
        if (ef.landmarks_missing || ef.extraction_failed) continue;
        if (ef.sample.frame_index < sweep.first ||
            ef.sample.frame_index >= sweep.second)
            continue;
        set.features.push_back({ef.sample.x_mm, ef.sample.y_mm,
                                ef.sample.pitch_deg, ef.sample.yaw_deg});
        set.targets.push_back(ef.sample.raw_strength);
    }
    return set;
}

// Full calibration for a material, cached per (material, seed).
inline calib::CalibrationProfile make_profile(const std::string& material,
                                              uint64_t seed = 1) {
    static std::map<std::string, calib::CalibrationProfile> cache;
    const std::string key = material + "#" + std::to_string(seed);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    auto script = pipeline::load_scenario(asset("calibration_session.json"));
    script.scene.material = mpisim::material_preset(material);
    const auto session = render_session(script, seed);
    const auto [pilot, log] = gbrt::fit(sweep_training_set(session), {});
    const auto input =
        pipeline::build_calibration_input(session.series, script.segments);
    auto profile =
        calib::run_calibration(input, pilot, 50, "testuser", material);
    cache[key] = profile;
    return profile;
}

}  // namespace testutil

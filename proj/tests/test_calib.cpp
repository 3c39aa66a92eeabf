#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "halotouch/calib.hpp"
#include "helpers.hpp"

using namespace halotouch;
using calib::CalibrationInput;
using calib::CalibrationSegments;
using halocore::HaloSample;

namespace {

// Constant corrector: predicts `value` at every pose.
gbrt::GbrtModel constant_model(double value) {
    gbrt::GbrtModel m;
    m.n_features = 4;
    m.base_prediction = value;
    m.bin_edges.resize(4);
    return m;
}

HaloSample sample_at(uint32_t frame, double raw) {
    HaloSample s;
    s.frame_index = frame;
    s.raw_strength = raw;
    s.pitch_deg = 45.0;
    return s;
}

}  // namespace

TEST_CASE("reference pose features are frame center at 45 degrees") {
    CHECK(calib::reference_features() == std::vector<double>{0.0, 0.0, 45.0, 0.0});
}

TEST_CASE("correct scales raw strength by reference / predicted") {
    const auto model = constant_model(100.0);
    CHECK(calib::correct(sample_at(0, 50.0), model, 200.0) == doctest::Approx(100.0));
    CHECK(calib::correct(sample_at(0, 50.0), model, 100.0) == doctest::Approx(50.0));
}

TEST_CASE("correct rejects predictions below the epsilon guard") {
    const auto model = constant_model(100.0);
    // 1% of 20000 = 200 > predicted 100.
    CHECK_THROWS_AS(calib::correct(sample_at(0, 50.0), model, 20000.0),
                    calib::DegeneratePoseError);
    CHECK_NOTHROW(calib::correct(sample_at(0, 50.0), model, 9999.0));
}

TEST_CASE("capture_state takes the window median") {
    std::vector<double> window;
    for (int i = 0; i < 15; ++i) window.push_back(10.0);
    for (int i = 0; i < 16; ++i) window.push_back(30.0);
    window.push_back(20.0);  // 32 values; median = mean of 20 and 30 = 25
    auto cap = calib::capture_state(window, "touch");
    CHECK(cap.anchor == doctest::Approx(25.0));

    std::vector<double> tight(31, 100.0);
    tight[5] = 101.0;
    auto c2 = calib::capture_state(tight, "touch");
    CHECK(c2.anchor == doctest::Approx(100.0));
    CHECK(c2.dispersion == doctest::Approx(0.0));
}

TEST_CASE("capture_state rejects short or unstable windows") {
    CHECK_THROWS_AS(calib::capture_state({10.0, 20.0, 30.0}, "touch"),
                    calib::CalibrationError);
    std::vector<double> noisy;
    for (int i = 0; i < 20; ++i) noisy.push_back(1.0);
    for (int i = 0; i < 20; ++i) noisy.push_back(100.0);
    CHECK_THROWS_AS(calib::capture_state(noisy, "touch"), calib::CalibrationError);
}

TEST_CASE("run_calibration enforces strictly increasing anchors") {
    CalibrationInput input;
    input.segments.states["hover"] = {0, 40};
    input.segments.states["subtle"] = {40, 80};
    input.segments.states["touch"] = {80, 120};
    input.segments.states["pressure"] = {120, 160};
    for (uint32_t f = 0; f < 160; ++f)
        input.samples.push_back(sample_at(f, f < 80 ? 50.0 : 50.0 + f));
    // hover == subtle: ordering violated.
    CHECK_THROWS_AS(calib::run_calibration(input, constant_model(100.0)),
                    calib::CalibrationError);
}

TEST_CASE("run_calibration requires all four state segments") {
    CalibrationInput input;
    input.segments.states["hover"] = {0, 40};
    input.segments.states["subtle"] = {40, 80};
    input.segments.states["touch"] = {80, 120};
    for (uint32_t f = 0; f < 120; ++f)
        input.samples.push_back(sample_at(f, 10.0 + f));
    CHECK_THROWS_AS(calib::run_calibration(input, constant_model(100.0)),
                    calib::CalibrationError);
}

TEST_CASE("synthetic four-state input produces the expected anchors") {
    CalibrationInput input;
    input.segments.states["hover"] = {0, 40};
    input.segments.states["subtle"] = {40, 80};
    input.segments.states["touch"] = {80, 120};
    input.segments.states["pressure"] = {120, 160};
    const double levels[4] = {10.0, 40.0, 70.0, 95.0};
    for (uint32_t f = 0; f < 160; ++f)
        input.samples.push_back(sample_at(f, levels[f / 40]));
    // Constant corrector predicting its own reference: correct() is identity.
    auto profile = calib::run_calibration(input, constant_model(100.0), 0, "u", "paper");
    CHECK(profile.anchors.hover == doctest::Approx(10.0));
    CHECK(profile.anchors.subtle == doctest::Approx(40.0));
    CHECK(profile.anchors.touch == doctest::Approx(70.0));
    CHECK(profile.anchors.pressure == doctest::Approx(95.0));
    CHECK_FALSE(profile.fine_tuned);
    CHECK(profile.user_id == "u");
}

TEST_CASE("full simulated session calibrates with ordered anchors") {
    auto profile = testutil::make_profile("paper");
    CHECK(profile.anchors.hover < profile.anchors.subtle);
    CHECK(profile.anchors.subtle < profile.anchors.touch);
    CHECK(profile.anchors.touch < profile.anchors.pressure);
    CHECK(profile.reference_strength > 0.0);
    CHECK(profile.line_count_ref > 0.0);
    CHECK(profile.fine_tuned);
    CHECK(profile.material == "paper");
}

TEST_CASE("corrected strength is pose-invariant after calibration") {
    auto profile = testutil::make_profile("paper");
    auto scene = testutil::small_scene();
    // Touch at different planar positions and yaws should correct to values
    // near the touch anchor once the regressor has normalized the pose.
    std::vector<mpisim::FingerPose> poses;
    poses.push_back(testutil::center_pose(0.0));
    poses.push_back(testutil::center_pose(0.0, 0.0, 60.0, -40.0));
    auto yawed = testutil::center_pose(0.0, 0.0, -50.0, 30.0);
    yawed.yaw_deg = 25.0;
    poses.push_back(yawed);
    for (const auto& pose : poses) {
        double mean = 0.0;
        for (uint64_t seed = 10; seed < 15; ++seed) {
            auto s = testutil::extract_one(scene, pose, seed);
            mean += calib::correct(s, profile.corrector, profile.reference_strength);
        }
        mean /= 5.0;
        CHECK(mean > 0.8 * profile.anchors.touch);
        CHECK(mean < 1.25 * profile.anchors.touch);
    }
}

TEST_CASE("profile save/load round-trips") {
    auto profile = testutil::make_profile("paper");
    const auto dir = (std::filesystem::temp_directory_path() / "prof_rt").string();
    calib::save_profile(profile, dir);
    auto back = calib::load_profile(dir);
    CHECK(back.user_id == profile.user_id);
    CHECK(back.material == profile.material);
    CHECK(back.anchors.hover == doctest::Approx(profile.anchors.hover));
    CHECK(back.anchors.pressure == doctest::Approx(profile.anchors.pressure));
    CHECK(back.reference_strength == doctest::Approx(profile.reference_strength));
    CHECK(back.line_count_ref == doctest::Approx(profile.line_count_ref));
    CHECK(back.fine_tuned == profile.fine_tuned);
    CHECK(gbrt::predict(back.corrector, calib::reference_features()) ==
          gbrt::predict(profile.corrector, calib::reference_features()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("load_profile rejects unordered anchors") {
    auto profile = testutil::make_profile("paper");
    const auto dir = (std::filesystem::temp_directory_path() / "prof_bad").string();
    profile.anchors.subtle = profile.anchors.touch + 1.0;
    calib::save_profile(profile, dir);
    CHECK_THROWS_AS(calib::load_profile(dir), calib::CalibrationError);
    std::filesystem::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "halotouch/mpisim.hpp"
#include "helpers.hpp"

using namespace halotouch;
using mpisim::FingerPose;
using mpisim::PathComponent;

namespace {

double positive_sum(const depthio::DepthFrame& frame, double surface_mm) {
    double sum = 0.0;
    for (uint16_t px : frame.depth) {
        const double d = double(px) - surface_mm;
        if (d > 8.0) sum += d;
    }
    return sum;
}

}  // namespace

TEST_CASE("phasor: single path is exact inversion") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> depth(100.0, 2500.0);
    for (int i = 0; i < 1000; ++i) {
        const double d = depth(rng);
        CHECK(std::abs(mpisim::phasor_depth({{1.0, d}}, 50e6) - d) < 1e-6);
    }
}

TEST_CASE("phasor: equal amplitudes return the mean path") {
    const double d = mpisim::phasor_depth({{1.0, 500.0}, {1.0, 520.0}}, 50e6);
    CHECK(d == doctest::Approx(510.0).epsilon(1e-12));
}

TEST_CASE("phasor: longer-path admixture pushes depth outward") {
    CHECK(mpisim::phasor_depth({{1.0, 500.0}, {0.3, 560.0}}, 50e6) > 500.0);
    for (double a = 0.05; a <= 0.5 + 1e-9; a += 0.05)
        for (double dd = 5.0; dd <= 60.0 + 1e-9; dd += 5.0) {
            const double d = mpisim::phasor_depth({{1.0, 500.0}, {a, 500.0 + dd}}, 50e6);
            CHECK(d > 500.0);
        }
}

TEST_CASE("phasor: error cases") {
    CHECK_THROWS_AS(mpisim::phasor_depth({}, 50e6), mpisim::SimError);
    CHECK_THROWS_AS(mpisim::phasor_depth({{0.0, 500.0}}, 50e6), mpisim::SimError);
    CHECK_THROWS_AS(mpisim::phasor_depth({{1.0, 4000.0}}, 50e6), mpisim::SimError);
}

TEST_CASE("render: determinism is bitwise") {
    auto scene = testutil::small_scene();
    auto [a, gta] = mpisim::render_frame(scene, testutil::center_pose(0.0), 11, 3);
    auto [b, gtb] = mpisim::render_frame(scene, testutil::center_pose(0.0), 11, 3);
    CHECK(a.depth == b.depth);
    auto [c, gtc] = mpisim::render_frame(scene, testutil::center_pose(0.0), 12, 3);
    CHECK(a.depth != c.depth);
}

TEST_CASE("render: 100 mm hover leaves only the noise floor") {
    auto scene = testutil::small_scene();
    scene.noise_sigma_mm = 0.0;
    auto [frame, gt] = mpisim::render_frame(scene, testutil::center_pose(100.0), 1);
    CHECK(positive_sum(frame, scene.surface_z_mm) == 0.0);
    CHECK(mpisim::expected_strength(scene, testutil::center_pose(100.0)) == 0.0);
}

TEST_CASE("render: touch outshines 10 mm hover at the same seed") {
    auto scene = testutil::small_scene();
    auto [touch, gt1] = mpisim::render_frame(scene, testutil::center_pose(0.0), 5);
    auto [hover, gt2] = mpisim::render_frame(scene, testutil::center_pose(10.0), 5);
    CHECK(positive_sum(touch, scene.surface_z_mm) >
          positive_sum(hover, scene.surface_z_mm));
}

TEST_CASE("render: strength monotone non-increasing in hover, seed-averaged") {
    auto scene = testutil::small_scene();
    double prev = 1e18;
    for (double h = 0.0; h <= 30.0 + 1e-9; h += 5.0) {
        double mean = 0.0;
        for (uint64_t seed = 0; seed < 20; ++seed) {
            auto [f, gt] = mpisim::render_frame(scene, testutil::center_pose(h), seed);
            mean += positive_sum(f, scene.surface_z_mm);
        }
        mean /= 20.0;
        CHECK(mean <= prev + 1.0);
        prev = mean;
    }
}

TEST_CASE("materials: suede > paper > foam at touch") {
    double strengths[3];
    const char* mats[3] = {"suede", "paper", "foam"};
    for (int m = 0; m < 3; ++m) {
        auto scene = testutil::small_scene(mats[m]);
        double mean = 0.0;
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto [f, gt] = mpisim::render_frame(scene, testutil::center_pose(0.0), seed);
            mean += positive_sum(f, scene.surface_z_mm);
        }
        strengths[m] = mean / 5.0;
    }
    CHECK(strengths[0] > strengths[1]);
    CHECK(strengths[1] > strengths[2]);
}

TEST_CASE("render: finger pose validation") {
    auto scene = testutil::small_scene();
    auto bad_pitch = testutil::center_pose(0.0);
    bad_pitch.pitch_deg = 2.0;
    CHECK_THROWS_AS(mpisim::render_frame(scene, bad_pitch, 1), mpisim::SimError);
    auto outside = testutil::center_pose(0.0, 0.0, 5000.0);
    CHECK_THROWS_AS(mpisim::render_frame(scene, outside, 1), mpisim::SimError);
}

TEST_CASE("trajectory: constant pose script gives equal frames up to noise stream") {
    auto scene = testutil::small_scene();
    scene.noise_sigma_mm = 0.0;
    std::vector<mpisim::Keyframe> script = {
        {0.0, testutil::center_pose(0.0)}, {0.2, testutil::center_pose(0.0)}};
    auto traj = mpisim::render_trajectory(scene, script, 30.0, 3);
    REQUIRE(traj.frames.size() == 7);
    for (size_t i = 1; i < traj.frames.size(); ++i)
        CHECK(traj.frames[i].depth == traj.frames[0].depth);
}

TEST_CASE("trajectory: 9-frame tap yields exactly one contact interval") {
    auto scene = testutil::small_scene();
    std::vector<mpisim::Keyframe> script = {{0.0, testutil::center_pose(20.0)},
                                            {4.0 / 30.0, testutil::center_pose(0.0)},
                                            {8.0 / 30.0, testutil::center_pose(20.0)}};
    auto traj = mpisim::render_trajectory(scene, script, 30.0, 3);
    REQUIRE(traj.truth.size() == 9);
    int intervals = 0;
    for (size_t i = 0; i < traj.truth.size(); ++i)
        if (traj.truth[i].contact && (i == 0 || !traj.truth[i - 1].contact))
            ++intervals;
    CHECK(intervals == 1);
}

TEST_CASE("trajectory: grid16 script produces 16 contacts at scripted targets") {
    auto script = pipeline::load_scenario(testutil::asset("grid16.json"));
    auto traj = mpisim::render_trajectory(script.scene, script.keyframes,
                                          script.fps, 21);
    std::vector<std::pair<double, double>> contacts;
    for (size_t i = 0; i < traj.truth.size(); ++i)
        if (traj.truth[i].contact && (i == 0 || !traj.truth[i - 1].contact))
            contacts.push_back({traj.truth[i].pose.x_mm, traj.truth[i].pose.y_mm});
    REQUIRE(contacts.size() == 16);
    int k = 0;
    const double lo = -100.0, step = 200.0 / 3.0;
    for (int gy = 0; gy < 4; ++gy)
        for (int gx = 0; gx < 4; ++gx, ++k) {
            CHECK(contacts[k].first == doctest::Approx(lo + gx * step).epsilon(0.01));
            CHECK(contacts[k].second == doctest::Approx(lo + gy * step).epsilon(0.01));
        }
}

TEST_CASE("trajectory: same (scene, script, seed) gives identical stream bytes") {
    auto scene = testutil::small_scene();
    std::vector<mpisim::Keyframe> script = {{0.0, testutil::center_pose(20.0)},
                                            {0.3, testutil::center_pose(0.0)}};
    auto a = mpisim::render_trajectory(scene, script, 30.0, 5);
    auto b = mpisim::render_trajectory(scene, script, 30.0, 5);
    depthio::StreamHeader hd;
    hd.width = uint16_t(scene.width);
    hd.height = uint16_t(scene.height);
    std::ostringstream sa, sb;
    depthio::write_stream(a.frames, hd, sa);
    depthio::write_stream(b.frames, hd, sb);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("characterize: self-normalization and envelope shapes") {
    auto rows = mpisim::characterize(testutil::small_scene());
    REQUIRE(!rows.empty());

    for (const auto& r : rows)
        if (r.param == "yaw_deg" && r.value == 0.0)
            CHECK(r.strength_norm == doctest::Approx(1.0));

    std::vector<double> touch_yaw;
    for (const auto& r : rows)
        if (r.param == "yaw_deg" && r.state == "touch") touch_yaw.push_back(r.strength_norm);
    REQUIRE(touch_yaw.size() == 11);
    for (size_t i = 1; i < touch_yaw.size(); ++i)
        CHECK(touch_yaw[i] <= touch_yaw[i - 1] + 0.01);

    for (const auto& r : rows)
        if (r.param == "z_m" && r.state == "touch") CHECK(r.strength_norm >= 0.75);
}

TEST_CASE("characterization CSV round-trips") {
    auto rows = mpisim::characterize(testutil::small_scene());
    const auto path = (std::filesystem::temp_directory_path() / "chars_rt.csv").string();
    mpisim::write_characterization_csv(rows, path);
    auto back = mpisim::read_characterization_csv(path);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].param == rows[i].param);
        CHECK(back[i].state == rows[i].state);
        CHECK(back[i].value == doctest::Approx(rows[i].value));
        CHECK(back[i].strength_norm == doctest::Approx(rows[i].strength_norm).epsilon(1e-4));
    }
    std::filesystem::remove(path);
}

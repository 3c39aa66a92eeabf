#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "halotouch/depthio.hpp"
#include "halotouch/mpisim.hpp"
#include "helpers.hpp"

using namespace halotouch;
using depthio::DepthFrame;
using depthio::StreamHeader;

namespace {

DepthFrame make_frame(uint16_t w, uint16_t h, uint32_t index, uint16_t fill) {
    DepthFrame f;
    f.width = w;
    f.height = h;
    f.frame_index = index;
    f.timestamp_us = uint64_t(index) * 33333;
    f.depth.assign(size_t(w) * h, fill);
    return f;
}

StreamHeader header_for(uint16_t w, uint16_t h) {
    StreamHeader hd;
    hd.width = w;
    hd.height = h;
    return hd;
}

std::string round_trip_bytes(const std::vector<DepthFrame>& frames,
                             const StreamHeader& hd) {
    std::ostringstream sink;
    depthio::write_stream(frames, hd, sink);
    return sink.str();
}

}  // namespace

TEST_CASE("stream round-trip: empty") {
    std::stringstream io;
    depthio::write_stream({}, header_for(4, 4), io);
    auto [hd, frames] = depthio::read_stream(io);
    CHECK(frames.empty());
    CHECK(hd.width == 4);
    CHECK(hd.height == 4);
}

TEST_CASE("stream round-trip: one 2x2 zero frame is header + 8 depth bytes") {
    auto f = make_frame(2, 2, 0, 0);
    std::stringstream io;
    const uint64_t total = depthio::write_stream({f}, header_for(2, 2), io);
    // header: magic 4 + version 2 + dims 4 + fps 4 + flags 1 + pose 12 + count 4
    const uint64_t header_bytes = 4 + 2 + 4 + 4 + 1 + 12 + 4;
    CHECK(total == header_bytes + 8 + 8);  // timestamp u64 + 4 u16 pixels
    auto [hd, frames] = depthio::read_stream(io);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0].depth == f.depth);
}

TEST_CASE("stream round-trip: randomized payloads bytewise") {
    std::mt19937_64 rng(42);
    for (int it = 0; it < 20; ++it) {
        const uint16_t w = uint16_t(2 + rng() % 10), h = uint16_t(2 + rng() % 10);
        StreamHeader hd = header_for(w, h);
        hd.has_ir = it % 2 == 1;
        std::vector<DepthFrame> frames;
        const int n = 1 + int(rng() % 5);
        for (int i = 0; i < n; ++i) {
            auto f = make_frame(w, h, uint32_t(i), 0);
            for (auto& px : f.depth) px = uint16_t(rng());
            if (hd.has_ir) {
                f.ir.resize(f.depth.size());
                for (auto& px : f.ir) px = uint16_t(rng());
            }
            frames.push_back(std::move(f));
        }
        const std::string bytes = round_trip_bytes(frames, hd);
        std::istringstream in(bytes);
        auto [hd2, frames2] = depthio::read_stream(in);
        REQUIRE(frames2.size() == frames.size());
        for (size_t i = 0; i < frames.size(); ++i) {
            CHECK(frames2[i].depth == frames[i].depth);
            CHECK(frames2[i].ir == frames[i].ir);
            CHECK(frames2[i].timestamp_us == frames[i].timestamp_us);
        }
        CHECK(round_trip_bytes(frames2, hd2) == bytes);
    }
}

TEST_CASE("simulator frames survive the stream container") {
    auto scene = testutil::small_scene();
    std::vector<DepthFrame> frames;
    for (uint32_t i = 0; i < 90; ++i) {
        auto f = mpisim::render_background_frame(scene, 9, i);
        f.timestamp_us = i * 33333;
        frames.push_back(std::move(f));
    }
    std::stringstream io;
    depthio::write_stream(frames, header_for(frames[0].width, frames[0].height), io);
    auto [hd, back] = depthio::read_stream(io);
    REQUIRE(back.size() == 90);
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i].depth == frames[i].depth);
    for (size_t i = 1; i < back.size(); ++i)
        CHECK(back[i].timestamp_us > back[i - 1].timestamp_us);
}

TEST_CASE("corrupted magic raises a bad-magic error") {
    std::string bytes = round_trip_bytes({make_frame(2, 2, 0, 500)}, header_for(2, 2));
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_WITH_AS(depthio::read_stream(in),
                         doctest::Contains("bad magic"), depthio::FormatError);
}

TEST_CASE("truncation mid-frame names the frame index") {
    std::vector<DepthFrame> frames = {make_frame(4, 4, 0, 500),
                                      make_frame(4, 4, 1, 501),
                                      make_frame(4, 4, 2, 502)};
    std::string bytes = round_trip_bytes(frames, header_for(4, 4));
    bytes.resize(bytes.size() - 10);  // cut into the last frame's depth plane
    std::istringstream in(bytes);
    CHECK_THROWS_WITH_AS(depthio::read_stream(in), doctest::Contains("frame 2"),
                         depthio::FormatError);

    std::istringstream in2(bytes);
    std::string error;
    auto [hd, partial] = depthio::read_stream_prefix(in2, &error);
    CHECK(partial.size() == 2);
    CHECK(error == "truncated depth plane at frame 2");
}

TEST_CASE("frame/header dimension mismatch is rejected") {
    std::ostringstream sink;
    CHECK_THROWS_AS(depthio::write_stream({make_frame(4, 4, 0, 500)},
                                          header_for(8, 8), sink),
                    depthio::DimensionError);
}

TEST_CASE("background mean of constant frames is exact") {
    std::vector<DepthFrame> frames(60, make_frame(3, 3, 0, 500));
    auto bg = depthio::build_background(frames);
    CHECK(bg.frames_used == 60);
    for (size_t i = 0; i < bg.mean_depth.size(); ++i) {
        CHECK(bg.valid_mask[i] == 1);
        CHECK(bg.mean_depth[i] == doctest::Approx(500.0));
    }
}

TEST_CASE("invalid 0 mm samples are excluded from the mean") {
    auto a = make_frame(1, 1, 0, 500);
    auto b = make_frame(1, 1, 1, 0);
    auto c = make_frame(1, 1, 2, 500);
    auto bg = depthio::build_background({a, b, c});
    CHECK(bg.valid_mask[0] == 1);
    CHECK(bg.mean_depth[0] == doctest::Approx(500.0));
}

TEST_CASE("noisy simulator background converges to the surface") {
    auto scene = testutil::small_scene();
    std::vector<DepthFrame> frames;
    for (uint32_t i = 0; i < 60; ++i)
        frames.push_back(mpisim::render_background_frame(scene, 123, i));
    auto bg = depthio::build_background(frames);
    // Per-pixel: sigma 2 mm over 60 frames, worst of ~30k pixels.
    double grand = 0.0;
    for (double m : bg.mean_depth) {
        CHECK(std::abs(m - 500.0) < 1.6);
        grand += m;
    }
    grand /= double(bg.mean_depth.size());
    CHECK(std::abs(grand - 500.0) < 0.05);
}

TEST_CASE("subtract_background signs and identity") {
    auto f = make_frame(2, 1, 0, 500);
    auto bg = depthio::build_background({f});
    auto zero = depthio::subtract_background(f, bg);
    CHECK(zero.values[0] == 0.0);
    CHECK(zero.values[1] == 0.0);

    f.depth[0] = 480;  // hand pixel, nearer than the surface
    f.depth[1] = 509;  // halo pixel, "dented" beyond the surface
    auto diff = depthio::subtract_background(f, bg);
    CHECK(diff.values[0] == doctest::Approx(-20.0));
    CHECK(diff.values[1] == doctest::Approx(9.0));
}

TEST_CASE("invalid pixels map to diff 0") {
    auto f = make_frame(1, 1, 0, 500);
    auto bg = depthio::build_background({f});
    f.depth[0] = 0;
    CHECK(depthio::subtract_background(f, bg).values[0] == 0.0);
}

TEST_CASE("surface scale follows the pinhole model") {
    auto [sx, sy] = depthio::surface_scale_mm_per_px({0.5, 0, 0}, 640, 576);
    CHECK(sx == doctest::Approx(2.0 * 500.0 * std::tan(37.5 * std::numbers::pi / 180.0) / 640));
    CHECK(sy == doctest::Approx(2.0 * 500.0 * std::tan(32.5 * std::numbers::pi / 180.0) / 576));
    auto [sx2, sy2] = depthio::surface_scale_mm_per_px({1.0, 0, 0}, 640, 576);
    CHECK(sx2 == doctest::Approx(2.0 * sx));
    CHECK(sy2 == doctest::Approx(2.0 * sy));
}

#pragma once

// Depth frame data model, the HTDS binary stream container, and static
// background modeling via per-pixel mean with an invalid-sample (0 mm) mask.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace halotouch::depthio {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CameraPose {
    double z_m = 0.5;       // vertical distance above the surface
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;
};

struct StreamHeader {
    static constexpr char kMagic[4] = {'H', 'T', 'D', 'S'};
    uint16_t version = 1;
    uint16_t width = 640;
    uint16_t height = 576;
    float nominal_fps = 30.0f;
    bool has_depth = true;
    bool has_ir = false;
    CameraPose camera_pose;
};

struct DepthFrame {
    uint16_t width = 0;
    uint16_t height = 0;
    uint64_t timestamp_us = 0;
    uint32_t frame_index = 0;
    std::vector<uint16_t> depth;   // row-major millimeters, 0 = invalid
    std::vector<uint16_t> ir;      // optional intensity plane

    size_t pixel_count() const { return size_t(width) * height; }
    uint16_t at(int u, int v) const { return depth[size_t(v) * width + u]; }
};

struct BackgroundModel {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<double> mean_depth;
    std::vector<uint8_t> valid_mask;
    int frames_used = 0;
};

struct DiffMap {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<double> values;    // signed millimeters, + = halo, - = object

    double at(int u, int v) const { return values[size_t(v) * width + u]; }
};

// Surface-plane millimeters per pixel at the camera's standoff distance,
// assuming the NFOV 75x65 degree field of view. Returns {sx, sy}.
std::pair<double, double> surface_scale_mm_per_px(const CameraPose& pose,
                                                  int width, int height);

uint64_t write_stream(const std::vector<DepthFrame>& frames,
                      const StreamHeader& header, std::ostream& sink);
std::pair<StreamHeader, std::vector<DepthFrame>> read_stream(std::istream& source);

// Tolerant variant: with a non-null error slot, a malformed or truncated
// stream reports the message there and returns the frames read so far
// instead of throwing.
std::pair<StreamHeader, std::vector<DepthFrame>> read_stream_prefix(
    std::istream& source, std::string* error);

uint64_t write_stream_file(const std::vector<DepthFrame>& frames,
                           const StreamHeader& header, const std::string& path);
std::pair<StreamHeader, std::vector<DepthFrame>> read_stream_file(const std::string& path);

BackgroundModel build_background(const std::vector<DepthFrame>& frames);
DiffMap subtract_background(const DepthFrame& frame, const BackgroundModel& bg);

}  // namespace halotouch::depthio

#include "halotouch/depthio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

namespace halotouch::depthio {

namespace {

constexpr double kHFovDeg = 75.0;
constexpr double kVFovDeg = 65.0;
constexpr uint32_t kUnknownFrameCount = 0xFFFFFFFFu;

template <typename T>
void put_le(std::ostream& os, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& value) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (is.gcount() != std::streamsize(sizeof(T))) return false;
    std::memcpy(&value, buf, sizeof(T));
    return true;
}

void write_plane(std::ostream& os, const std::vector<uint16_t>& plane) {
    os.write(reinterpret_cast<const char*>(plane.data()),
             std::streamsize(plane.size() * sizeof(uint16_t)));
}

bool read_plane(std::istream& is, std::vector<uint16_t>& plane, size_t n) {
    plane.resize(n);
    is.read(reinterpret_cast<char*>(plane.data()), std::streamsize(n * sizeof(uint16_t)));
    return is.gcount() == std::streamsize(n * sizeof(uint16_t));
}

}  // namespace

std::pair<double, double> surface_scale_mm_per_px(const CameraPose& pose,
                                                  int width, int height) {
    const double z_mm = pose.z_m * 1000.0;
    const double sx = 2.0 * z_mm * std::tan(kHFovDeg / 2.0 * std::numbers::pi / 180.0) / width;
    const double sy = 2.0 * z_mm * std::tan(kVFovDeg / 2.0 * std::numbers::pi / 180.0) / height;
    return {sx, sy};
}

uint64_t write_stream(const std::vector<DepthFrame>& frames,
                      const StreamHeader& header, std::ostream& sink) {
    for (const auto& f : frames) {
        if (f.width != header.width || f.height != header.height)
            throw DimensionError("frame " + std::to_string(f.frame_index) +
                                 " does not match header dimensions");
        if (f.depth.size() != f.pixel_count())
            throw DimensionError("depth plane size mismatch at frame " +
                                 std::to_string(f.frame_index));
        if (header.has_ir && f.ir.size() != f.pixel_count())
            throw DimensionError("ir plane size mismatch at frame " +
                                 std::to_string(f.frame_index));
    }

    const auto start = sink.tellp();
    sink.write(StreamHeader::kMagic, 4);
    put_le<uint16_t>(sink, header.version);
    put_le<uint16_t>(sink, header.width);
    put_le<uint16_t>(sink, header.height);
    put_le<float>(sink, header.nominal_fps);
    uint8_t flags = (header.has_depth ? 1 : 0) | (header.has_ir ? 2 : 0);
    put_le<uint8_t>(sink, flags);
    put_le<float>(sink, float(header.camera_pose.z_m));
    put_le<float>(sink, float(header.camera_pose.yaw_deg));
    put_le<float>(sink, float(header.camera_pose.pitch_deg));
    put_le<uint32_t>(sink, uint32_t(frames.size()));

    for (const auto& f : frames) {
        put_le<uint64_t>(sink, f.timestamp_us);
        write_plane(sink, f.depth);
        if (header.has_ir) write_plane(sink, f.ir);
    }
    if (!sink) throw FormatError("stream sink write failure");
    return uint64_t(sink.tellp() - start);
}

std::pair<StreamHeader, std::vector<DepthFrame>> read_stream_prefix(
    std::istream& source, std::string* error) {
    StreamHeader h;
    std::vector<DepthFrame> frames;
    auto fail = [&](const std::string& msg)
        -> std::pair<StreamHeader, std::vector<DepthFrame>> {
        if (!error) throw FormatError(msg);
        *error = msg;
        return {h, std::move(frames)};
    };

    char magic[4];
    source.read(magic, 4);
    if (source.gcount() != 4 || std::memcmp(magic, StreamHeader::kMagic, 4) != 0)
        return fail("bad magic: not an HTDS stream");

    uint8_t flags = 0;
    float z = 0, yaw = 0, pitch = 0;
    uint32_t count = 0;
    if (!get_le(source, h.version) || !get_le(source, h.width) ||
        !get_le(source, h.height) || !get_le(source, h.nominal_fps) ||
        !get_le(source, flags) || !get_le(source, z) || !get_le(source, yaw) ||
        !get_le(source, pitch) || !get_le(source, count))
        return fail("truncated header");
    if (h.version != 1)
        return fail("unsupported HTDS version " + std::to_string(h.version));
    if (h.width == 0 || h.height == 0)
        return fail("invalid dimensions in header");
    h.has_depth = flags & 1;
    h.has_ir = flags & 2;
    h.camera_pose = {double(z), double(yaw), double(pitch)};

    const size_t npx = size_t(h.width) * h.height;
    uint32_t index = 0;
    while (true) {
        if (count != kUnknownFrameCount && index >= count) break;
        uint64_t ts = 0;
        if (!get_le(source, ts)) {
            if (count == kUnknownFrameCount) break;
            return fail("truncated at frame " + std::to_string(index));
        }
        DepthFrame f;
        f.width = h.width;
        f.height = h.height;
        f.timestamp_us = ts;
        f.frame_index = index;
        if (!read_plane(source, f.depth, npx))
            return fail("truncated depth plane at frame " + std::to_string(index));
        if (h.has_ir && !read_plane(source, f.ir, npx))
            return fail("truncated ir plane at frame " + std::to_string(index));
        frames.push_back(std::move(f));
        ++index;
    }
    return {h, std::move(frames)};
}

std::pair<StreamHeader, std::vector<DepthFrame>> read_stream(std::istream& source) {
    return read_stream_prefix(source, nullptr);
}

uint64_t write_stream_file(const std::vector<DepthFrame>& frames,
                           const StreamHeader& header, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    return write_stream(frames, header, out);
}

std::pair<StreamHeader, std::vector<DepthFrame>> read_stream_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path);
    return read_stream(in);
}

BackgroundModel build_background(const std::vector<DepthFrame>& frames) {
    if (frames.empty()) throw DimensionError("build_background: empty input");
    const uint16_t w = frames.front().width, h = frames.front().height;
    const size_t npx = size_t(w) * h;

    BackgroundModel bg;
    bg.width = w;
    bg.height = h;
    bg.frames_used = int(frames.size());
    bg.mean_depth.assign(npx, 0.0);
    bg.valid_mask.assign(npx, 0);

    std::vector<uint32_t> counts(npx, 0);
    for (const auto& f : frames) {
        if (f.width != w || f.height != h)
            throw DimensionError("build_background: dimension mismatch at frame " +
                                 std::to_string(f.frame_index));
        for (size_t i = 0; i < npx; ++i) {
            const uint16_t d = f.depth[i];
            if (d == 0) continue;  // invalid sentinel, excluded from the mean
            bg.mean_depth[i] += d;
            ++counts[i];
        }
    }
    for (size_t i = 0; i < npx; ++i) {
        if (counts[i] > 0) {
            bg.mean_depth[i] /= counts[i];
            bg.valid_mask[i] = 1;
        }
    }
    return bg;
}

DiffMap subtract_background(const DepthFrame& frame, const BackgroundModel& bg) {
    if (frame.width != bg.width || frame.height != bg.height)
        throw DimensionError("subtract_background: dimension mismatch");
    DiffMap diff;
    diff.width = frame.width;
    diff.height = frame.height;
    diff.values.assign(frame.pixel_count(), 0.0);
    for (size_t i = 0; i < diff.values.size(); ++i) {
        if (frame.depth[i] == 0 || !bg.valid_mask[i]) continue;
        diff.values[i] = double(frame.depth[i]) - bg.mean_depth[i];
    }
    return diff;
}

}  // namespace halotouch::depthio

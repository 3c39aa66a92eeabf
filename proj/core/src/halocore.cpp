#include "halotouch/halocore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace halotouch::halocore {

HaloMap reveal(const DiffMap& diff, double threshold) {
    if (threshold <= 0.0) throw ExtractionError("reveal: threshold must be > 0");
    HaloMap map;
    map.width = diff.width;
    map.height = diff.height;
    map.labels.resize(diff.values.size());
    for (size_t i = 0; i < diff.values.size(); ++i) {
        const double d = diff.values[i];
        map.labels[i] = d > threshold ? kLabelHalo : (d < 0.0 ? kLabelObject : kLabelBackground);
    }
    return map;
}

HaloSample extract_sample(const DiffMap& diff, const LandmarkFrame& lm,
                          const CameraPose& cam, double threshold,
                          bool count_mode) {
    if (lm.tip_u < 0 || lm.tip_u >= diff.width || lm.tip_v < 0 ||
        lm.tip_v >= diff.height)
        throw ExtractionError("extract_sample: fingertip out of bounds");
    const double du = lm.tip_u - lm.dip_u;
    const double dv = lm.tip_v - lm.dip_v;
    const double n = std::hypot(du, dv);
    if (n < 1e-6)
        throw ExtractionError("extract_sample: degenerate landmarks");

    const double dir_u = du / n, dir_v = dv / n;
    const double cu = lm.tip_u + kPatchAheadPx * dir_u;
    const double cv = lm.tip_v + kPatchAheadPx * dir_v;
    const int u0 = std::clamp(int(std::lround(cu)) - kPatchWidth / 2, 0,
                              std::max(0, diff.width - kPatchWidth));
    const int v0 = std::clamp(int(std::lround(cv)) - kPatchHeight / 2, 0,
                              std::max(0, diff.height - kPatchHeight));
    const int u1 = std::min(u0 + kPatchWidth, int(diff.width));
    const int v1 = std::min(v0 + kPatchHeight, int(diff.height));

    double strength = 0.0;
    for (int v = v0; v < v1; ++v) {
        for (int u = u0; u < u1; ++u) {
            const double d = diff.at(u, v);
            if (d > threshold) strength += count_mode ? 1.0 : d;
        }
    }

    auto [sx, sy] = depthio::surface_scale_mm_per_px(cam, diff.width, diff.height);
    const double planar_mm = std::hypot(du * sx, dv * sy);
    const double height_mm = lm.tip_z_mm - lm.dip_z_mm;  // dip sits nearer the camera

    HaloSample s;
    s.frame_index = lm.frame_index;
    s.raw_strength = strength;
    s.x_mm = (lm.tip_u - diff.width / 2.0) * sx;
    s.y_mm = (lm.tip_v - diff.height / 2.0) * sy;
    s.pitch_deg = std::atan2(std::max(height_mm, 0.0), planar_mm) * 180.0 / std::numbers::pi;
    s.yaw_deg = std::atan2(dv, du) * 180.0 / std::numbers::pi;
    s.patch_u0 = u0;
    s.patch_v0 = v0;
    return s;
}

int count_line_pixels(const HaloMap& map, const LandmarkFrame& lm) {
    int x0 = int(std::lround(lm.tip_u)), y0 = int(std::lround(lm.tip_v));
    int x1 = int(std::lround(lm.dip_u)), y1 = int(std::lround(lm.dip_v));
    if (x0 == x1 && y0 == y1)
        throw ExtractionError("count_line_pixels: degenerate segment");

    // Bresenham over the tip->dip segment.
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int su = x0 < x1 ? 1 : -1, sv = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    int count = 0;
    while (true) {
        if (x0 >= 0 && x0 < map.width && y0 >= 0 && y0 < map.height &&
            map.at(x0, y0) == kLabelHalo)
            ++count;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += su; }
        if (e2 <= dx) { err += dx; y0 += sv; }
    }
    return count;
}

std::vector<uint16_t> blend(const std::vector<uint16_t>& ir,
                            const std::vector<uint16_t>& rgb_luma,
                            double ir_ratio) {
    if (ir.size() != rgb_luma.size())
        throw ExtractionError("blend: dimension mismatch");
    std::vector<uint16_t> out(ir.size());
    for (size_t i = 0; i < ir.size(); ++i) {
        const double v = ir_ratio * ir[i] + (1.0 - ir_ratio) * rgb_luma[i];
        out[i] = uint16_t(std::clamp(std::lround(v), long(0), long(65535)));
    }
    return out;
}

void write_landmarks_csv(const std::vector<LandmarkFrame>& landmarks,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ExtractionError("cannot open for writing: " + path);
    out << "frame,u_tip,v_tip,z_tip,u_dip,v_dip,z_dip,hand\n";
    for (const auto& lm : landmarks)
        out << lm.frame_index << ',' << lm.tip_u << ',' << lm.tip_v << ','
            << lm.tip_z_mm << ',' << lm.dip_u << ',' << lm.dip_v << ','
            << lm.dip_z_mm << ',' << lm.handedness << '\n';
}

std::vector<LandmarkFrame> read_landmarks_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ExtractionError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "frame,u_tip,v_tip,z_tip,u_dip,v_dip,z_dip,hand")
        throw ExtractionError("landmark CSV: bad or missing header");
    std::vector<LandmarkFrame> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        LandmarkFrame lm;
        auto next = [&] {
            if (!std::getline(ss, field, ','))
                throw ExtractionError("landmark CSV: malformed row: " + line);
            return field;
        };
        lm.frame_index = uint32_t(std::stoul(next()));
        lm.tip_u = std::stod(next());
        lm.tip_v = std::stod(next());
        lm.tip_z_mm = std::stod(next());
        lm.dip_u = std::stod(next());
        lm.dip_v = std::stod(next());
        lm.dip_z_mm = std::stod(next());
        std::getline(ss, lm.handedness);
        out.push_back(std::move(lm));
    }
    return out;
}

}  // namespace halotouch::halocore

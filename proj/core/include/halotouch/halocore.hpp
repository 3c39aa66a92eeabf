#pragma once

// Halo revealer and signal extraction: threshold filtering of the
// background-subtracted diff, landmark ingestion, per-frame feature
// computation, patch summation, and the IR+RGB blend utility.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/depthio.hpp"

namespace halotouch::halocore {

using depthio::CameraPose;
using depthio::DiffMap;

struct ExtractionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kDefaultThreshold = 8.0;
constexpr int kPatchWidth = 30;
constexpr int kPatchHeight = 20;
constexpr double kPatchAheadPx = 8.0;  // patch center offset beyond the tip

enum : uint8_t { kLabelBackground = 0, kLabelObject = 127, kLabelHalo = 255 };

struct HaloMap {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<uint8_t> labels;

    uint8_t at(int u, int v) const { return labels[size_t(v) * width + u]; }
};

struct LandmarkFrame {
    uint32_t frame_index = 0;
    double tip_u = 0, tip_v = 0, tip_z_mm = 0;
    double dip_u = 0, dip_v = 0, dip_z_mm = 0;
    std::string handedness = "right";
};

struct HaloSample {
    uint32_t frame_index = 0;
    double raw_strength = 0.0;  // sum of above-threshold diffs, mm units
    double x_mm = 0.0;          // fingertip back-projected to the surface
    double y_mm = 0.0;
    double pitch_deg = 0.0;
    double yaw_deg = 0.0;
    int patch_u0 = 0;
    int patch_v0 = 0;
};

HaloMap reveal(const DiffMap& diff, double threshold = kDefaultThreshold);

HaloSample extract_sample(const DiffMap& diff, const LandmarkFrame& lm,
                          const CameraPose& cam,
                          double threshold = kDefaultThreshold,
                          bool count_mode = false);

int count_line_pixels(const HaloMap& map, const LandmarkFrame& lm);

// out = 0.7 * ir + 0.3 * rgb_luma, clamped to u16.
std::vector<uint16_t> blend(const std::vector<uint16_t>& ir,
                            const std::vector<uint16_t>& rgb_luma,
                            double ir_ratio = 0.7);

// Landmark sidecar CSV: frame,u_tip,v_tip,z_tip,u_dip,v_dip,z_dip,hand
void write_landmarks_csv(const std::vector<LandmarkFrame>& landmarks,
                         const std::string& path);
std::vector<LandmarkFrame> read_landmarks_csv(const std::string& path);

}  // namespace halotouch::halocore

#pragma once

// Synthetic time-of-flight frame generator. A phasor sum of phase-shifted
// return paths reproduces the depth bias ("denting") that appears in an
// annulus around a near-surface fingertip, including its dependence on
// hover height, pressure, surface material, and camera placement.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "halotouch/depthio.hpp"

namespace halotouch::mpisim {

using depthio::CameraPose;
using depthio::DepthFrame;

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct PathComponent {
    double amplitude = 0.0;   // linear units, >= 0
    double path_mm = 0.0;     // one-way equivalent millimeters
};

struct MaterialProfile {
    std::string name = "paper";
    double diffuse_gain = 1.0;
};

// Preset ordering: suede > paper ~ wood ~ plastic > foam.
MaterialProfile material_preset(const std::string& name);
const std::vector<std::string>& material_preset_names();

struct SceneSpec {
    double surface_z_mm = 500.0;
    MaterialProfile material;
    CameraPose camera;
    double modulation_hz = 50e6;
    double noise_sigma_mm = 2.0;
    double global_mpi_gain = 1.0;
    double landmark_jitter_px = 0.0;
    int width = 640;
    int height = 576;

    double unambiguous_range_mm() const {
        return kSpeedOfLight / (2.0 * modulation_hz) * 1000.0;
    }
};

struct FingerPose {
    double x_mm = 0.0;        // surface-plane position, frame center = (0, 0)
    double y_mm = 0.0;
    double hover_mm = 0.0;    // 0 = contact
    double pressure = 0.0;    // normalized 0..1, only meaningful at contact
    double pitch_deg = 45.0;
    double yaw_deg = 0.0;     // bearing of the finger axis in the surface plane
    double roll_deg = 0.0;    // held constant, not modeled

    bool contact() const { return hover_mm == 0.0; }
};

struct Landmark {
    double u = 0, v = 0;      // pixel, sub-pixel precision
    double z_mm = 0;          // depth at the landmark
};

struct GroundTruthRecord {
    uint32_t frame_index = 0;
    FingerPose pose;
    bool finger_present = false;
    bool contact = false;
    double ground_pressure = 0.0;
    Landmark fingertip;
    Landmark fingerdip;
};

struct Keyframe {
    double t_s = 0.0;
    std::optional<FingerPose> finger;  // absent = background-only
};

struct Trajectory {
    std::vector<DepthFrame> frames;
    std::vector<GroundTruthRecord> truth;
};

// Measured depth of a single ToF pixel receiving the given return paths.
double phasor_depth(const std::vector<PathComponent>& components, double f_hz);

// Expected raw halo strength (sum of positive depth bias over the halo
// region) for a pose, from the amplitude law alone. This is the surface the
// signal corrector learns; the rendered frames realize it pixel by pixel.
double expected_strength(const SceneSpec& scene, const FingerPose& finger);

std::pair<DepthFrame, GroundTruthRecord> render_frame(const SceneSpec& scene,
                                                      const FingerPose& finger,
                                                      uint64_t seed,
                                                      uint32_t frame_index = 0);
DepthFrame render_background_frame(const SceneSpec& scene, uint64_t seed,
                                   uint32_t frame_index = 0);

Trajectory render_trajectory(const SceneSpec& scene,
                             const std::vector<Keyframe>& script,
                             double fps, uint64_t seed);

struct CharacterizationRow {
    std::string param;    // "yaw_deg" | "pitch_deg" | "z_m"
    double value = 0.0;
    std::string state;    // "hover" | "subtle" | "touch" | "pressure"
    double strength_norm = 0.0;
};

// Sweeps one camera parameter at a time with the finger held at frame
// center in each calibration state; curves are normalized to their value at
// the reference placement (yaw 0, pitch 0, z 0.5 m). Rendering is noiseless
// so curves are deterministic.
std::vector<CharacterizationRow> characterize(const SceneSpec& base);

void write_characterization_csv(const std::vector<CharacterizationRow>& rows,
                                const std::string& path);
std::vector<CharacterizationRow> read_characterization_csv(const std::string& path);

// Calibration-state finger poses used by characterize and scripted sessions.
FingerPose state_pose(const std::string& state, double x_mm = 0, double y_mm = 0);

}  // namespace halotouch::mpisim

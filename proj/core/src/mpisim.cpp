#include "halotouch/mpisim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace halotouch::mpisim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Halo model knobs. Only the orderings and monotone trends documented in
// the header are contractual; the constants are tuned against the pipeline.
constexpr double kBaseAmplitude = 0.7;      // touch state, paper, 45 deg pitch
constexpr double kExtraPathMm = 150.0;      // long-path excess for the MPI return
constexpr double kOnsetMm = 20.0;           // halo onset hover height
constexpr double kPressureGain = 0.8;
constexpr double kYawExp = 0.1;             // camera attenuation exponents
constexpr double kPitchExp = 0.15;
constexpr double kZExp = 0.1;
constexpr double kOnsetShrinkExp = 60.0;    // proximity decays much faster than touch
constexpr double kAnnulusA = 12.0;          // ellipse semi-axes, pixels
constexpr double kAnnulusB = 8.0;
constexpr double kAnnulusAheadPx = 8.0;     // center offset beyond the fingertip
constexpr double kStrengthThresholdMm = 8.0;
constexpr double kFingerLenMm = 25.0;       // fingertip to fingerdip
constexpr double kFingerRadiusPx = 5.0;
constexpr double kFingerBackPx = 40.0;
constexpr double kFingerThicknessMm = 6.0;
constexpr double kTipThicknessMm = 4.0;
constexpr double kAveragingOnsetMm = 30.0;  // boundary blur precedes the halo
constexpr double kLineGain = 2.2;           // tip-region interference strength
constexpr double kLineOnsetMm = 20.0;
constexpr double kLineRegionPx = 14.0;

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double camera_attenuation(const CameraPose& cam) {
    const double cy = std::max(std::cos(cam.yaw_deg * kDeg), 1e-6);
    const double cp = std::max(std::cos(cam.pitch_deg * kDeg), 1e-6);
    const double zr = 0.5 / std::max(cam.z_m, 1e-3);
    return std::pow(cy, kYawExp) * std::pow(cp, kPitchExp) *
           std::pow(std::min(zr, 1.0), kZExp);
}

double finger_pitch_factor(double pitch_deg) {
    const double t = (pitch_deg - 45.0) / 25.0;
    return std::exp(-t * t);
}

double vignette(const SceneSpec& scene, double x_mm, double y_mm) {
    const double r2 = (x_mm * x_mm + y_mm * y_mm) / (300.0 * 300.0);
    return std::max(1.0 - 0.35 * r2, 0.2);
}

// Hover ramp: 1 at contact, 0 at the onset height. The onset height itself
// shrinks steeply as the camera moves off the reference placement, which is
// what makes proximity sensing degrade long before touch sensing does.
double hover_ramp(double hover_mm, double atten) {
    const double cutoff = kOnsetMm * std::pow(atten, kOnsetShrinkExp);
    if (cutoff <= 0.0 || hover_mm >= cutoff) return 0.0;
    const double t = 1.0 - hover_mm / cutoff;
    return t * t;
}

// Peak MPI amplitude for a pose (before the spatial annulus profile).
double peak_amplitude(const SceneSpec& scene, const FingerPose& f) {
    const double atten = camera_attenuation(scene.camera);
    return kBaseAmplitude * scene.material.diffuse_gain * scene.global_mpi_gain *
           (1.0 + kPressureGain * f.pressure) * finger_pitch_factor(f.pitch_deg) *
           vignette(scene, f.x_mm, f.y_mm) * atten * hover_ramp(f.hover_mm, atten);
}

double measured_bias_mm(double amplitude, double f_hz) {
    // Depth bias of a unit direct return plus one long path of the given
    // relative amplitude, from the phasor sum.
    if (amplitude <= 0.0) return 0.0;
    const double phi = 4.0 * kPi * f_hz * (kExtraPathMm / 1000.0) / kSpeedOfLight;
    const double num = amplitude * std::sin(phi);
    const double den = 1.0 + amplitude * std::cos(phi);
    return kSpeedOfLight / (4.0 * kPi * f_hz) * std::atan2(num, den) * 1000.0;
}

struct FingerGeometry {
    double tip_u, tip_v, dip_u, dip_v;
    double dir_u, dir_v;     // unit vector dip -> tip in pixels
    double sx, sy;
};

FingerGeometry finger_geometry(const SceneSpec& scene, const FingerPose& f) {
    auto [sx, sy] = depthio::surface_scale_mm_per_px(scene.camera, scene.width,
                                                     scene.height);
    FingerGeometry g;
    g.sx = sx;
    g.sy = sy;
    g.tip_u = scene.width / 2.0 + f.x_mm / sx;
    g.tip_v = scene.height / 2.0 + f.y_mm / sy;
    const double planar = kFingerLenMm * std::cos(f.pitch_deg * kDeg);
    g.dip_u = g.tip_u - planar * std::cos(f.yaw_deg * kDeg) / sx;
    g.dip_v = g.tip_v - planar * std::sin(f.yaw_deg * kDeg) / sy;
    const double du = g.tip_u - g.dip_u, dv = g.tip_v - g.dip_v;
    const double n = std::hypot(du, dv);
    g.dir_u = n > 1e-9 ? du / n : 1.0;
    g.dir_v = n > 1e-9 ? dv / n : 0.0;
    return g;
}

}  // namespace

MaterialProfile material_preset(const std::string& name) {
    if (name == "paper") return {name, 1.0};
    if (name == "wood") return {name, 0.95};
    if (name == "suede") return {name, 1.5};
    if (name == "plastic") return {name, 0.9};
    if (name == "foam") return {name, 0.4};
    throw SimError("unknown material preset: " + name);
}

const std::vector<std::string>& material_preset_names() {
    static const std::vector<std::string> names = {"paper", "wood", "suede",
                                                   "plastic", "foam"};
    return names;
}

FingerPose state_pose(const std::string& state, double x_mm, double y_mm) {
    FingerPose p;
    p.x_mm = x_mm;
    p.y_mm = y_mm;
    if (state == "hover") p.hover_mm = 10.0;
    else if (state == "subtle") p.hover_mm = 1.0;
    else if (state == "touch") p.hover_mm = 0.0;
    else if (state == "pressure") { p.hover_mm = 0.0; p.pressure = 1.0; }
    else throw SimError("unknown calibration state: " + state);
    return p;
}

double phasor_depth(const std::vector<PathComponent>& components, double f_hz) {
    if (components.empty()) throw SimError("phasor_depth: empty path list");
    const double range_mm = kSpeedOfLight / (2.0 * f_hz) * 1000.0;
    double re = 0.0, im = 0.0, total = 0.0;
    for (const auto& c : components) {
        if (c.path_mm >= range_mm)
            throw SimError("phasor_depth: path beyond unambiguous range");
        const double phi = 4.0 * kPi * f_hz * (c.path_mm / 1000.0) / kSpeedOfLight;
        re += c.amplitude * std::cos(phi);
        im += c.amplitude * std::sin(phi);
        total += c.amplitude;
    }
    if (total <= 0.0) throw SimError("phasor_depth: zero total amplitude");
    double phase = std::atan2(im, re);
    if (phase < 0.0) phase += 2.0 * kPi;
    return kSpeedOfLight / (4.0 * kPi * f_hz) * phase * 1000.0;
}

double expected_strength(const SceneSpec& scene, const FingerPose& finger) {
    const double a_peak = peak_amplitude(scene, finger);
    if (a_peak <= 0.0) return 0.0;
    const auto g = finger_geometry(scene, finger);
    double sum = 0.0;
    const int r = int(std::ceil(kAnnulusA));
    for (int dv = -r; dv <= r; ++dv) {
        for (int du = -r; du <= r; ++du) {
            const double pu = du, pv = dv;
            const double along = pu * g.dir_u + pv * g.dir_v;
            const double across = -pu * g.dir_v + pv * g.dir_u;
            const double rho2 = (along / kAnnulusA) * (along / kAnnulusA) +
                                (across / kAnnulusB) * (across / kAnnulusB);
            if (rho2 >= 1.0) continue;
            const double bias =
                measured_bias_mm(a_peak * (1.0 - rho2), scene.modulation_hz);
            if (bias > kStrengthThresholdMm) sum += bias;
        }
    }
    return sum;
}

DepthFrame render_background_frame(const SceneSpec& scene, uint64_t seed,
                                   uint32_t frame_index) {
    DepthFrame f;
    f.width = uint16_t(scene.width);
    f.height = uint16_t(scene.height);
    f.frame_index = frame_index;
    f.depth.resize(f.pixel_count());
    std::mt19937_64 rng(mix_seed(seed, frame_index));
    std::normal_distribution<double> noise(0.0, scene.noise_sigma_mm);
    for (auto& px : f.depth) {
        double d = scene.surface_z_mm;
        if (scene.noise_sigma_mm > 0.0) d += noise(rng);
        px = uint16_t(std::clamp(std::lround(d), long(1), long(65535)));
    }
    return f;
}

std::pair<DepthFrame, GroundTruthRecord> render_frame(const SceneSpec& scene,
                                                      const FingerPose& finger,
                                                      uint64_t seed,
                                                      uint32_t frame_index) {
    if (finger.pitch_deg < 5.0 || finger.pitch_deg > 85.0)
        throw SimError("render_frame: finger pitch outside [5, 85] degrees");
    if (finger.hover_mm < 0.0 || finger.pressure < 0.0 || finger.pressure > 1.0)
        throw SimError("render_frame: invalid finger pose");

    const auto geom = finger_geometry(scene, finger);
    if (geom.tip_u < 2 || geom.tip_u > scene.width - 3 || geom.tip_v < 2 ||
        geom.tip_v > scene.height - 3)
        throw SimError("render_frame: finger outside frame");

    DepthFrame frame;
    frame.width = uint16_t(scene.width);
    frame.height = uint16_t(scene.height);
    frame.frame_index = frame_index;
    frame.depth.resize(frame.pixel_count());

    std::mt19937_64 rng(mix_seed(seed, frame_index));
    std::normal_distribution<double> noise(0.0, scene.noise_sigma_mm);

    const double atten = camera_attenuation(scene.camera);
    const double a_peak = peak_amplitude(scene, finger);
    const double a_line_base = kLineGain * scene.material.diffuse_gain *
                               scene.global_mpi_gain * atten *
                               vignette(scene, finger.x_mm, finger.y_mm);
    const double sin_p = std::sin(finger.pitch_deg * kDeg);
    const double annulus_cu = geom.tip_u + kAnnulusAheadPx * geom.dir_u;
    const double annulus_cv = geom.tip_v + kAnnulusAheadPx * geom.dir_v;

    // Only pixels near the finger need the path machinery; bound the region.
    const int margin = int(kFingerBackPx + kAnnulusA + kFingerRadiusPx + 2);
    const int u0 = std::max(0, int(geom.tip_u) - margin);
    const int u1 = std::min(scene.width - 1, int(geom.tip_u) + margin);
    const int v0 = std::max(0, int(geom.tip_v) - margin);
    const int v1 = std::min(scene.height - 1, int(geom.tip_v) + margin);

    std::vector<PathComponent> paths;
    for (int v = 0; v < scene.height; ++v) {
        for (int u = 0; u < scene.width; ++u) {
            double d;
            if (u < u0 || u > u1 || v < v0 || v > v1) {
                d = scene.surface_z_mm;
            } else {
                paths.clear();
                const double pu = u - geom.tip_u, pv = v - geom.tip_v;
                // Signed distance along the finger axis, tip = 0, positive
                // behind the tip; perpendicular offset from the axis.
                const double along = -(pu * geom.dir_u + pv * geom.dir_v);
                const double across = -pu * geom.dir_v + pv * geom.dir_u;
                const bool in_finger = along >= -1.0 && along <= kFingerBackPx &&
                                       std::abs(across) <= kFingerRadiusPx;
                if (in_finger) {
                    const double s_mm = std::max(along, 0.0) * geom.sx /
                                        std::max(std::cos(finger.pitch_deg * kDeg), 0.17);
                    const double h_local = finger.hover_mm + s_mm * sin_p;
                    const double thick = along < 4.0 ? kTipThicknessMm : kFingerThicknessMm;
                    const double d_finger = scene.surface_z_mm - h_local - thick;
                    paths.push_back({1.0, d_finger});
                    // Boundary averaging: near the silhouette edge the pixel
                    // mixes finger and surface returns once the finger is
                    // within the averaging onset height.
                    if (finger.hover_mm < kAveragingOnsetMm &&
                        std::abs(across) > kFingerRadiusPx - 1.5)
                        paths.push_back({0.5, scene.surface_z_mm});
                    // Tip-region interference: the corner formed right at the
                    // tip corrupts finger pixels hard enough to push them past
                    // the surface; this is what the fingertip-fingerdip line
                    // count reads out for far hover.
                    if (along <= kLineRegionPx) {
                        // Decay length scales with standoff so the pixel
                        // footprint of the tip interference stays put as the
                        // camera backs away; the hover gate shares the halo's
                        // shrinking onset, so far hover readout degrades off
                        // the calibrated placement while touch does not.
                        const double line_onset =
                            kLineOnsetMm * scene.camera.z_m / 0.5;
                        const double a_line =
                            a_line_base * hover_ramp(finger.hover_mm, atten) *
                            std::clamp(1.0 - h_local / line_onset, 0.0, 1.0);
                        if (a_line > 0.0)
                            paths.push_back(
                                {a_line, scene.surface_z_mm + kExtraPathMm});
                    }
                } else {
                    paths.push_back({1.0, scene.surface_z_mm});
                    const double au = u - annulus_cu, av = v - annulus_cv;
                    const double al = au * geom.dir_u + av * geom.dir_v;
                    const double ac = -au * geom.dir_v + av * geom.dir_u;
                    const double rho2 = (al / kAnnulusA) * (al / kAnnulusA) +
                                        (ac / kAnnulusB) * (ac / kAnnulusB);
                    if (rho2 < 1.0 && a_peak > 0.0)
                        paths.push_back({a_peak * (1.0 - rho2),
                                         scene.surface_z_mm + kExtraPathMm});
                }
                d = phasor_depth(paths, scene.modulation_hz);
            }
            if (scene.noise_sigma_mm > 0.0) d += noise(rng);
            frame.depth[size_t(v) * scene.width + u] =
                uint16_t(std::clamp(std::lround(d), long(1), long(65535)));
        }
    }

    GroundTruthRecord gt;
    gt.frame_index = frame_index;
    gt.pose = finger;
    gt.finger_present = true;
    gt.contact = finger.contact();
    gt.ground_pressure = finger.contact() ? finger.pressure : 0.0;
    gt.fingertip = {geom.tip_u, geom.tip_v,
                    scene.surface_z_mm - finger.hover_mm - kTipThicknessMm};
    gt.fingerdip = {geom.dip_u, geom.dip_v,
                    scene.surface_z_mm - finger.hover_mm -
                        kFingerLenMm * sin_p - kTipThicknessMm};
    if (scene.landmark_jitter_px > 0.0) {
        std::mt19937_64 jrng(mix_seed(seed ^ 0x6a09e667f3bcc908ull, frame_index));
        std::normal_distribution<double> j(0.0, scene.landmark_jitter_px);
        gt.fingertip.u += j(jrng);
        gt.fingertip.v += j(jrng);
        gt.fingerdip.u += j(jrng);
        gt.fingerdip.v += j(jrng);
    }
    return {std::move(frame), gt};
}

Trajectory render_trajectory(const SceneSpec& scene,
                             const std::vector<Keyframe>& script, double fps,
                             uint64_t seed) {
    if (script.empty()) throw SimError("render_trajectory: empty script");
    for (size_t i = 1; i < script.size(); ++i)
        if (script[i].t_s < script[i - 1].t_s)
            throw SimError("render_trajectory: keyframes not time-ordered");

    Trajectory out;
    const double t_end = script.back().t_s;
    const uint32_t n_frames = uint32_t(std::floor(t_end * fps)) + 1;
    size_t k = 0;
    for (uint32_t i = 0; i < n_frames; ++i) {
        const double t = i / fps;
        while (k + 1 < script.size() && script[k + 1].t_s <= t) ++k;
        std::optional<FingerPose> pose;
        if (k + 1 < script.size()) {
            // Interpolate only when both endpoints carry a pose; a gap on
            // either side means the finger is out of the scene.
            if (script[k].finger && script[k + 1].finger) {
                const double a =
                    (t - script[k].t_s) / (script[k + 1].t_s - script[k].t_s);
                const FingerPose& p0 = *script[k].finger;
                const FingerPose& p1 = *script[k + 1].finger;
                FingerPose p;
                p.x_mm = std::lerp(p0.x_mm, p1.x_mm, a);
                p.y_mm = std::lerp(p0.y_mm, p1.y_mm, a);
                p.hover_mm = std::lerp(p0.hover_mm, p1.hover_mm, a);
                p.pressure = std::lerp(p0.pressure, p1.pressure, a);
                p.pitch_deg = std::lerp(p0.pitch_deg, p1.pitch_deg, a);
                p.yaw_deg = std::lerp(p0.yaw_deg, p1.yaw_deg, a);
                pose = p;
            }
        } else {
            pose = script[k].finger;
        }

        if (pose) {
            auto [frame, gt] = render_frame(scene, *pose, seed, i);
            frame.timestamp_us = uint64_t(t * 1e6);
            out.frames.push_back(std::move(frame));
            out.truth.push_back(gt);
        } else {
            auto frame = render_background_frame(scene, seed, i);
            frame.timestamp_us = uint64_t(t * 1e6);
            out.frames.push_back(std::move(frame));
            GroundTruthRecord gt;
            gt.frame_index = i;
            out.truth.push_back(gt);
        }
    }
    return out;
}

std::vector<CharacterizationRow> characterize(const SceneSpec& base) {
    SceneSpec scene = base;
    scene.noise_sigma_mm = 0.0;
    scene.landmark_jitter_px = 0.0;

    const std::vector<std::string> states = {"hover", "subtle", "touch", "pressure"};
    auto strength_at = [&](const CameraPose& cam, const std::string& state) {
        SceneSpec s = scene;
        s.camera = cam;
        const FingerPose pose = state_pose(state);
        auto [frame, gt] = render_frame(s, pose, 1);
        // Sum positive deviation from the known flat surface over the region
        // around the fingertip; independent of the extraction module.
        double sum = 0.0;
        const auto g = finger_geometry(s, pose);
        const int r = int(kAnnulusA + kAnnulusAheadPx + 4);
        for (int dv = -r; dv <= r; ++dv) {
            for (int du = -r; du <= r; ++du) {
                const int u = int(g.tip_u) + du, v = int(g.tip_v) + dv;
                if (u < 0 || u >= s.width || v < 0 || v >= s.height) continue;
                const double diff = double(frame.at(u, v)) - s.surface_z_mm;
                if (diff > kStrengthThresholdMm) sum += diff;
            }
        }
        return sum;
    };

    std::vector<CharacterizationRow> rows;
    auto sweep = [&](const std::string& param, double lo, double hi, double step) {
        for (const auto& state : states) {
            CameraPose ref = scene.camera;
            ref.yaw_deg = 0;
            ref.pitch_deg = 0;
            ref.z_m = 0.5;
            const double ref_strength = strength_at(ref, state);
            for (double v = lo; v <= hi + 1e-9; v += step) {
                CameraPose cam = ref;
                if (param == "yaw_deg") cam.yaw_deg = v;
                else if (param == "pitch_deg") cam.pitch_deg = v;
                else cam.z_m = v;
                const double s = strength_at(cam, state);
                rows.push_back(
                    {param, v, state, ref_strength > 0 ? s / ref_strength : 0.0});
            }
        }
    };
    sweep("yaw_deg", 0.0, 50.0, 5.0);
    sweep("pitch_deg", -45.0, 45.0, 5.0);
    sweep("z_m", 0.5, 1.0, 0.05);
    return rows;
}

void write_characterization_csv(const std::vector<CharacterizationRow>& rows,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open for writing: " + path);
    out << "param,state,strength_norm\n";
    for (const auto& r : rows)
        out << r.param << '=' << r.value << ',' << r.state << ','
            << r.strength_norm << '\n';
}

std::vector<CharacterizationRow> read_characterization_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "param,state,strength_norm")
        throw SimError("characterization CSV: bad or missing header");
    std::vector<CharacterizationRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        CharacterizationRow r;
        std::string param, strength;
        if (!std::getline(ss, param, ',') || !std::getline(ss, r.state, ',') ||
            !std::getline(ss, strength))
            throw SimError("characterization CSV: malformed row: " + line);
        const auto eq = param.find('=');
        if (eq == std::string::npos)
            throw SimError("characterization CSV: param missing value: " + param);
        r.param = param.substr(0, eq);
        r.value = std::stod(param.substr(eq + 1));
        r.strength_norm = std::stod(strength);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace halotouch::mpisim

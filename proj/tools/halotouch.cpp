// halotouch CLI: simulate | calibrate | run | eval | characterize | gbrt.
// Exit codes: 0 ok, 2 validation error, 64 usage error, 70 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "halotouch/detect.hpp"
#include "halotouch/evalkit.hpp"
#include "halotouch/pipeline.hpp"

namespace fs = std::filesystem;
using namespace halotouch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw ValidationFailure(what + " not found: " + path);
}

struct GlobalOpts {
    uint64_t seed = 0;
    std::string out_dir = ".";
};

pipeline::RunManifest base_manifest(const std::string& subcommand,
                                    const GlobalOpts& g) {
    pipeline::RunManifest m;
    m.subcommand = subcommand;
    m.seed = g.seed;
    return m;
}

// ---- simulate ----------------------------------------------------------

int cmd_simulate(const GlobalOpts& g, const std::string& scene_path,
                 const std::string& stem) {
    require_file(scene_path, "scene file");
    const auto script = pipeline::load_scenario(scene_path);
    const auto result = pipeline::simulate_to_files(script, g.seed, g.out_dir, stem);

    auto m = base_manifest("simulate", g);
    m.inputs["scene"] = scene_path;
    m.outputs["stream"] = result.stream_path;
    m.outputs["landmarks"] = result.landmarks_path;
    m.outputs["truth"] = result.truth_path;
    m.stats["frame_count"] = result.frame_count;
    pipeline::write_manifest(m, (fs::path(g.out_dir) / (stem + "_manifest.json")).string());
    std::cout << "wrote " << result.frame_count << " frames to "
              << result.stream_path << "\n";
    return kExitOk;
}

// ---- calibrate ---------------------------------------------------------

int cmd_calibrate(const GlobalOpts& g, const std::string& stream_path,
                  const std::string& landmarks_path, const std::string& segments_path,
                  const std::string& pilot_path, const std::string& out_dir,
                  int fine_tune_iters, const std::string& user_id,
                  const std::string& material) {
    require_file(stream_path, "stream");
    require_file(landmarks_path, "landmarks");
    require_file(segments_path, "segments file");
    require_file(pilot_path, "pilot corrector");

    const auto segments_script = pipeline::load_scenario(segments_path);
    if (!segments_script.has_segments)
        throw ValidationFailure("segments file " + segments_path +
                                " has no \"segments\" object");
    const auto [header, frames] = depthio::read_stream_file(stream_path);
    const auto landmarks = halocore::read_landmarks_csv(landmarks_path);
    const auto pilot = gbrt::load_model(pilot_path);

    const auto series =
        pipeline::extract_series(frames, landmarks, header.camera_pose);
    const auto input =
        pipeline::build_calibration_input(series, segments_script.segments);
    const auto profile = calib::run_calibration(input, pilot, fine_tune_iters,
                                                user_id, material);
    calib::save_profile(profile, out_dir);

    auto m = base_manifest("calibrate", g);
    m.inputs = {{"stream", stream_path},
                {"landmarks", landmarks_path},
                {"segments", segments_path},
                {"pilot", pilot_path}};
    m.outputs["profile"] = (fs::path(out_dir) / "profile.json").string();
    m.config = {{"fine_tune_iters", std::to_string(fine_tune_iters)},
                {"user_id", user_id},
                {"material", material}};
    m.stats["anchor_hover"] = profile.anchors.hover;
    m.stats["anchor_subtle"] = profile.anchors.subtle;
    m.stats["anchor_touch"] = profile.anchors.touch;
    m.stats["anchor_pressure"] = profile.anchors.pressure;
    pipeline::write_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    std::cout << "profile written to " << out_dir << "\n";
    return kExitOk;
}

// ---- run ---------------------------------------------------------------

int cmd_run(const GlobalOpts& g, const std::string& stream_path,
            const std::string& landmarks_path, const std::string& profile_dir,
            const std::string& events_path, const std::string& trace_path,
            double threshold, const std::string& material) {
    require_file(stream_path, "stream");
    require_file(landmarks_path, "landmarks");
    require_file((fs::path(profile_dir) / "profile.json").string(), "profile");

    // Tolerant read: a truncated stream still yields the frames before the
    // damage so a partial trace can be written; the run exits nonzero.
    std::ifstream stream_in(stream_path, std::ios::binary);
    if (!stream_in) throw ValidationFailure("cannot open stream: " + stream_path);
    std::string stream_error;
    const auto [header, frames] = depthio::read_stream_prefix(stream_in, &stream_error);
    if (!stream_error.empty())
        std::cerr << "warning: stream " << stream_path << ": " << stream_error
                  << "; processing " << frames.size() << " frames\n";
    const auto landmarks = halocore::read_landmarks_csv(landmarks_path);
    const auto profile = calib::load_profile(profile_dir);
    if (!material.empty() && material != profile.material)
        std::cerr << "warning: stream material '" << material
                  << "' differs from profile material '" << profile.material
                  << "'\n";

    auto result = pipeline::run_pipeline(frames, landmarks, header.camera_pose,
                                         profile, {}, threshold);

    std::vector<detect::TouchEvent> all = result.events;
    all.insert(all.end(), result.keys.begin(), result.keys.end());
    std::sort(all.begin(), all.end(),
              [](const detect::TouchEvent& a, const detect::TouchEvent& b) {
                  return a.frame_index < b.frame_index;
              });
    detect::write_events_csv(all, events_path);
    detect::write_trace_csv(result.trace, trace_path);

    auto m = base_manifest("run", g);
    m.inputs = {{"stream", stream_path},
                {"landmarks", landmarks_path},
                {"profile", profile_dir}};
    m.outputs = {{"events", events_path}, {"trace", trace_path}};
    m.config["threshold"] = std::to_string(threshold);
    m.stats["latency_frames"] = result.latency_frames;
    m.stats["frames_processed"] = double(result.trace.size());
    m.stats["key_count"] = double(result.keys.size());
    m.stats["notes"] = double(result.notes.size());
    pipeline::write_manifest(
        m, (fs::path(events_path).replace_extension(".manifest.json")).string());
    for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
    std::cout << result.keys.size() << " keys, trace " << result.trace.size()
              << " frames\n";
    return stream_error.empty() ? kExitOk : kExitValidation;
}

// ---- characterize ------------------------------------------------------

int cmd_characterize(const GlobalOpts& g, const std::string& scene_path,
                     const std::string& out_csv) {
    mpisim::SceneSpec scene;
    if (!scene_path.empty()) {
        require_file(scene_path, "scene file");
        scene = pipeline::load_scenario(scene_path).scene;
    }
    const auto rows = mpisim::characterize(scene);
    mpisim::write_characterization_csv(rows, out_csv);

    auto m = base_manifest("characterize", g);
    if (!scene_path.empty()) m.inputs["scene"] = scene_path;
    m.outputs["csv"] = out_csv;
    m.stats["rows"] = double(rows.size());
    pipeline::write_manifest(
        m, (fs::path(out_csv).replace_extension(".manifest.json")).string());
    std::cout << rows.size() << " rows written to " << out_csv << "\n";
    return kExitOk;
}

// ---- gbrt --------------------------------------------------------------

gbrt::TrainingSet read_training_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationFailure("cannot read training CSV: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationFailure("training CSV empty: " + path);
    gbrt::TrainingSet set;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> row;
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2)
            throw ValidationFailure("training CSV row needs features + target: " + line);
        set.targets.push_back(row.back());
        row.pop_back();
        set.features.push_back(std::move(row));
    }
    return set;
}

int cmd_gbrt_fit(const GlobalOpts& g, const std::string& train_path,
                 const std::string& out_path, gbrt::GbrtConfig cfg) {
    require_file(train_path, "training CSV");
    cfg.seed = g.seed;
    const auto data = read_training_csv(train_path);
    const auto [model, log] = gbrt::fit(data, cfg);
    gbrt::save_model(model, out_path);

    const auto log_path = fs::path(out_path).replace_extension(".log.csv");
    std::ofstream log_out(log_path);
    log_out << "iteration,train_mse,valid_mse\n";
    for (size_t i = 0; i < log.train_mse.size(); ++i)
        log_out << i << ',' << log.train_mse[i] << ',' << log.valid_mse[i] << '\n';

    auto m = base_manifest("gbrt", g);
    m.inputs["train"] = train_path;
    m.outputs = {{"model", out_path}, {"log", log_path.string()}};
    m.config = {{"learning_rate", std::to_string(cfg.learning_rate)},
                {"n_iterations", std::to_string(cfg.n_iterations)},
                {"max_leaf_nodes", std::to_string(cfg.max_leaf_nodes)},
                {"min_samples_leaf", std::to_string(cfg.min_samples_leaf)},
                {"max_bins", std::to_string(cfg.max_bins)}};
    if (!log.train_mse.empty()) m.stats["final_train_mse"] = log.train_mse.back();
    if (!log.valid_mse.empty()) m.stats["final_valid_mse"] = log.valid_mse.back();
    pipeline::write_manifest(
        m, (fs::path(out_path).replace_extension(".manifest.json")).string());
    std::cout << "model with " << model.trees.size() << " trees written to "
              << out_path << "\n";
    return kExitOk;
}

int cmd_gbrt_predict(const GlobalOpts& g, const std::string& model_path,
                     const std::string& in_path, const std::string& out_path) {
    require_file(model_path, "model");
    require_file(in_path, "features CSV");
    const auto model = gbrt::load_model(model_path);

    std::ifstream in(in_path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationFailure("features CSV empty: " + in_path);
    std::ofstream out(out_path);
    out << "prediction\n";
    size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> row;
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        out << gbrt::predict(model, row) << '\n';
        ++n;
    }

    auto m = base_manifest("gbrt", g);
    m.inputs = {{"model", model_path}, {"features", in_path}};
    m.outputs["predictions"] = out_path;
    m.stats["rows"] = double(n);
    pipeline::write_manifest(
        m, (fs::path(out_path).replace_extension(".manifest.json")).string());
    return kExitOk;
}

// ---- eval --------------------------------------------------------------

std::vector<double> contact_onsets_ms(const std::vector<mpisim::GroundTruthRecord>& truth,
                                      double fps) {
    std::vector<double> t;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i].contact && (i == 0 || !truth[i - 1].contact))
            t.push_back(truth[i].frame_index / fps * 1000.0);
    return t;
}

void write_text_report(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

int cmd_eval_touch(const GlobalOpts& g, const std::string& events_path,
                   const std::string& truth_path, double fps, double window_ms,
                   const std::string& out_prefix) {
    require_file(events_path, "events CSV");
    require_file(truth_path, "truth CSV");
    const auto events = detect::read_events_csv(events_path);
    const auto truth = pipeline::read_truth_csv(truth_path);

    std::vector<double> detected;
    for (const auto& e : events)
        if (e.kind == detect::TouchEvent::Kind::Down)
            detected.push_back(e.frame_index / fps * 1000.0);
    const auto rep =
        evalkit::match_events(detected, contact_onsets_ms(truth, fps), window_ms);

    std::ofstream csv(out_prefix + ".csv");
    csv << "tp,fp,fn,precision,recall,f1,window_ms\n"
        << rep.true_positives << ',' << rep.false_positives << ','
        << rep.false_negatives << ',' << rep.precision << ',' << rep.recall
        << ',' << rep.f1 << ',' << rep.pairing_window_ms << '\n';
    std::ostringstream txt;
    txt << "touch-down detection\n"
        << "  TP " << rep.true_positives << "  FP " << rep.false_positives
        << "  FN " << rep.false_negatives << "\n"
        << "  precision " << rep.precision << "  recall " << rep.recall
        << "  F1 " << rep.f1 << "\n";
    write_text_report(out_prefix + ".txt", txt.str());

    auto m = base_manifest("eval", g);
    m.inputs = {{"events", events_path}, {"truth", truth_path}};
    m.outputs = {{"csv", out_prefix + ".csv"}, {"txt", out_prefix + ".txt"}};
    m.config = {{"report", "touch"},
                {"fps", std::to_string(fps)},
                {"window_ms", std::to_string(window_ms)}};
    m.stats["f1"] = rep.f1;
    pipeline::write_manifest(m, out_prefix + ".manifest.json");
    std::cout << txt.str();
    return kExitOk;
}

int cmd_eval_spatial(const GlobalOpts& g, const std::string& events_path,
                     const std::string& truth_path, double fps,
                     const std::string& out_prefix) {
    require_file(events_path, "events CSV");
    require_file(truth_path, "truth CSV");
    const auto events = detect::read_events_csv(events_path);
    const auto truth = pipeline::read_truth_csv(truth_path);

    struct Onset {
        double t_ms;
        evalkit::Point2 target;
    };
    std::vector<Onset> onsets;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i].contact && (i == 0 || !truth[i - 1].contact))
            onsets.push_back({truth[i].frame_index / fps * 1000.0,
                              {truth[i].pose.x_mm, truth[i].pose.y_mm}});
    std::vector<std::pair<evalkit::Point2, evalkit::Point2>> pairs;
    for (const auto& e : events) {
        if (e.kind != detect::TouchEvent::Kind::Down) continue;
        const double t = e.frame_index / fps * 1000.0;
        const Onset* best = nullptr;
        for (const auto& o : onsets)
            if (!best || std::abs(o.t_ms - t) < std::abs(best->t_ms - t)) best = &o;
        if (best && std::abs(best->t_ms - t) <= 200.0)
            pairs.push_back({{e.x_mm, e.y_mm}, best->target});
    }
    if (pairs.size() < 2)
        throw ValidationFailure("spatial report needs at least 2 matched events");
    const auto rep = evalkit::spatial_accuracy(pairs);

    std::ofstream csv(out_prefix + ".csv");
    csv << "mean_error_mm,sd_mm,offset_x_mm,offset_y_mm,outliers_removed,pairs\n"
        << rep.mean_euclidean_error << ',' << rep.sd << ',' << rep.global_offset.x
        << ',' << rep.global_offset.y << ',' << rep.outliers_removed << ','
        << pairs.size() << '\n';
    std::ofstream ecsv(out_prefix + "_ellipses.csv");
    ecsv << "center_x,center_y,semi_major,semi_minor,angle_deg\n";
    for (const auto& e : rep.ellipses)
        ecsv << e.center.x << ',' << e.center.y << ',' << e.semi_major << ','
             << e.semi_minor << ',' << e.angle_deg << '\n';
    std::ostringstream txt;
    txt << "spatial accuracy (" << pairs.size() << " pairs)\n"
        << "  global offset (" << rep.global_offset.x << ", "
        << rep.global_offset.y << ") mm\n"
        << "  mean error " << rep.mean_euclidean_error << " mm, sd " << rep.sd
        << " mm, " << rep.outliers_removed << " outliers removed\n";
    write_text_report(out_prefix + ".txt", txt.str());

    auto m = base_manifest("eval", g);
    m.inputs = {{"events", events_path}, {"truth", truth_path}};
    m.outputs = {{"csv", out_prefix + ".csv"},
                 {"ellipses", out_prefix + "_ellipses.csv"},
                 {"txt", out_prefix + ".txt"}};
    m.config = {{"report", "spatial"}, {"fps", std::to_string(fps)}};
    m.stats["mean_error_mm"] = rep.mean_euclidean_error;
    pipeline::write_manifest(m, out_prefix + ".manifest.json");
    std::cout << txt.str();
    return kExitOk;
}

int cmd_eval_mae(const GlobalOpts& g, const std::string& trace_path,
                 const std::string& truth_path, bool pressure,
                 const std::string& out_prefix) {
    require_file(trace_path, "trace CSV");
    require_file(truth_path, "truth CSV");
    const auto trace = detect::read_trace_csv(trace_path);
    const auto truth = pipeline::read_truth_csv(truth_path);

    std::map<uint32_t, const mpisim::GroundTruthRecord*> by_frame;
    for (const auto& t : truth) by_frame[t.frame_index] = &t;

    std::vector<double> predicted, targets;
    for (const auto& r : trace) {
        if (r.landmarks_missing) continue;
        const auto it = by_frame.find(r.frame_index);
        if (it == by_frame.end() || !it->second->finger_present) continue;
        const auto& t = *it->second;
        if (pressure) {
            if (!t.contact || t.ground_pressure <= 0.0) continue;
            predicted.push_back(r.pressure);
            targets.push_back(t.ground_pressure);
        } else {
            if (t.contact || t.pose.hover_mm <= 0.0) continue;
            predicted.push_back(r.hover_mm);
            targets.push_back(t.pose.hover_mm);
        }
    }
    const auto rep = evalkit::hover_pressure_mae(predicted, targets);

    const char* what = pressure ? "pressure" : "hover";
    std::ofstream csv(out_prefix + ".csv");
    csv << "target,mae\n";
    for (const auto& [target, mae] : rep.per_target)
        csv << target << ',' << mae << '\n';
    csv << "overall," << rep.mae << '\n';
    std::ostringstream txt;
    txt << what << " MAE " << rep.mae << (pressure ? " (fraction of full scale)" : " mm")
        << " over " << predicted.size() << " frames\n";
    for (const auto& [target, mae] : rep.per_target)
        txt << "  target " << target << ": " << mae << "\n";
    write_text_report(out_prefix + ".txt", txt.str());

    auto m = base_manifest("eval", g);
    m.inputs = {{"trace", trace_path}, {"truth", truth_path}};
    m.outputs = {{"csv", out_prefix + ".csv"}, {"txt", out_prefix + ".txt"}};
    m.config["report"] = what;
    m.stats["mae"] = rep.mae;
    pipeline::write_manifest(m, out_prefix + ".manifest.json");
    std::cout << txt.str();
    return kExitOk;
}

// Typing log: JSON array of {"reference", "input", "keystrokes":
// [{"t_ms", "key"}]}.
int cmd_eval_typing(const GlobalOpts& g, const std::string& log_path,
                    const std::string& out_prefix) {
    require_file(log_path, "typing log");
    std::ifstream in(log_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationFailure("typing log " + log_path + ": " + e.what());
    }
    std::vector<evalkit::SentenceLog> sentences;
    for (const auto& s : j) {
        evalkit::SentenceLog log;
        log.reference = s.at("reference");
        log.input = s.at("input");
        for (const auto& k : s.value("keystrokes", nlohmann::json::array()))
            log.keystrokes.push_back({k.at("t_ms"), k.at("key")});
        sentences.push_back(std::move(log));
    }
    const auto rep = evalkit::typing_metrics(sentences);

    std::ofstream csv(out_prefix + ".csv");
    csv << "wpm,accuracy,awpm,uer,cer\n"
        << rep.wpm << ',' << rep.accuracy << ',' << rep.awpm << ',' << rep.uer
        << ',' << rep.cer << '\n';
    std::ostringstream txt;
    txt << "typing metrics over " << sentences.size() << " sentences\n"
        << "  (word-index alignment; word-count mismatches pad as errors)\n"
        << "  WPM " << rep.wpm << "  accuracy " << rep.accuracy << "  AWPM "
        << rep.awpm << "\n"
        << "  UER " << rep.uer * 100 << "%  CER " << rep.cer * 100 << "%\n";
    write_text_report(out_prefix + ".txt", txt.str());

    auto m = base_manifest("eval", g);
    m.inputs["log"] = log_path;
    m.outputs = {{"csv", out_prefix + ".csv"}, {"txt", out_prefix + ".txt"}};
    m.config["report"] = "typing";
    m.stats["awpm"] = rep.awpm;
    pipeline::write_manifest(m, out_prefix + ".manifest.json");
    std::cout << txt.str();
    return kExitOk;
}

int cmd_eval_characterize(const GlobalOpts& g, const std::string& csv_path,
                          const std::string& out_prefix) {
    require_file(csv_path, "characterization CSV");
    const auto rows = mpisim::read_characterization_csv(csv_path);
    const auto results = evalkit::characterization_report(rows);

    std::ofstream csv(out_prefix + ".csv");
    csv << "property,pass,detail\n";
    bool all_pass = true;
    std::ostringstream txt;
    txt << "characterization properties\n";
    for (const auto& r : results) {
        csv << r.name << ',' << (r.pass ? 1 : 0) << ',' << r.detail << '\n';
        txt << "  " << (r.pass ? "PASS" : "FAIL") << "  " << r.name;
        if (!r.detail.empty()) txt << "  (" << r.detail << ")";
        txt << "\n";
        all_pass = all_pass && r.pass;
    }
    write_text_report(out_prefix + ".txt", txt.str());

    auto m = base_manifest("eval", g);
    m.inputs["csv"] = csv_path;
    m.outputs = {{"csv", out_prefix + ".csv"}, {"txt", out_prefix + ".txt"}};
    m.config["report"] = "characterize";
    m.stats["all_pass"] = all_pass ? 1.0 : 0.0;
    pipeline::write_manifest(m, out_prefix + ".manifest.json");
    std::cout << txt.str();
    return all_pass ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HaloTouch: depth-camera touch sensing on everyday surfaces"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (flags take precedence)");
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed for seeded subcommands");
    app.add_option("--out-dir", g.out_dir, "Output directory");

    int rc = kExitOk;

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Render a scripted scenario");
    static std::string sim_scene, sim_stem = "scenario";
    simulate->add_option("--scene", sim_scene, "Scenario JSON")->required();
    simulate->add_option("--stem", sim_stem, "Output file stem");
    simulate->callback([&] { rc = cmd_simulate(g, sim_scene, sim_stem); });

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Build a calibration profile");
    static std::string cal_stream, cal_landmarks, cal_segments, cal_pilot;
    static std::string cal_out = "profile", cal_user = "default", cal_material = "paper";
    static int cal_iters = 50;
    calibrate->add_option("--stream", cal_stream, "HTDS stream")->required();
    calibrate->add_option("--landmarks", cal_landmarks, "Landmark CSV")->required();
    calibrate->add_option("--segments", cal_segments,
                          "Scenario JSON with segment boundaries")->required();
    calibrate->add_option("--pilot", cal_pilot, "Pilot corrector (HTGB)")->required();
    calibrate->add_option("--out", cal_out, "Profile directory");
    calibrate->add_option("--fine-tune-iters", cal_iters, "Warm-start iterations");
    calibrate->add_option("--user", cal_user, "User id");
    calibrate->add_option("--material", cal_material, "Surface material label");
    calibrate->callback([&] {
        rc = cmd_calibrate(g, cal_stream, cal_landmarks, cal_segments, cal_pilot,
                           cal_out, cal_iters, cal_user, cal_material);
    });

    // run
    auto* run = app.add_subcommand("run", "Detect touches on a recorded stream");
    static std::string run_stream, run_landmarks, run_profile;
    static std::string run_events = "events.csv", run_trace = "trace.csv";
    static std::string run_material;
    static double run_threshold = halocore::kDefaultThreshold;
    run->add_option("--stream", run_stream, "HTDS stream")->required();
    run->add_option("--landmarks", run_landmarks, "Landmark CSV")->required();
    run->add_option("--profile", run_profile, "Profile directory")->required();
    run->add_option("--events", run_events, "Event CSV out");
    run->add_option("--trace", run_trace, "State trace CSV out");
    run->add_option("--threshold", run_threshold, "Halo revealer threshold, mm");
    run->add_option("--material", run_material,
                    "Material label of the stream, checked against the profile");
    run->callback([&] {
        rc = cmd_run(g, run_stream, run_landmarks, run_profile, run_events,
                     run_trace, run_threshold, run_material);
    });

    // characterize
    auto* characterize =
        app.add_subcommand("characterize", "Sweep camera placement envelopes");
    static std::string chr_scene, chr_out = "characterization.csv";
    characterize->add_option("--scene", chr_scene, "Scenario JSON (optional)");
    characterize->add_option("--out", chr_out, "Output CSV");
    characterize->callback([&] { rc = cmd_characterize(g, chr_scene, chr_out); });

    // gbrt
    auto* gb = app.add_subcommand("gbrt", "Train or apply the regressor");
    gb->require_subcommand(1);
    auto* gb_fit = gb->add_subcommand("fit", "Train from CSV");
    static std::string fit_train, fit_out = "model.htgb";
    static gbrt::GbrtConfig fit_cfg;
    gb_fit->add_option("--train", fit_train, "Training CSV (features..., target)")
        ->required();
    gb_fit->add_option("--out", fit_out, "Model file out");
    gb_fit->add_option("--learning-rate", fit_cfg.learning_rate, "Shrinkage");
    gb_fit->add_option("--iterations", fit_cfg.n_iterations, "Boosting iterations");
    gb_fit->add_option("--max-leaves", fit_cfg.max_leaf_nodes, "Max leaves per tree");
    gb_fit->add_option("--min-samples-leaf", fit_cfg.min_samples_leaf,
                       "Min samples per leaf");
    gb_fit->add_option("--max-bins", fit_cfg.max_bins, "Histogram bins");
    gb_fit->callback([&] { rc = cmd_gbrt_fit(g, fit_train, fit_out, fit_cfg); });
    auto* gb_pred = gb->add_subcommand("predict", "Predict from CSV");
    static std::string pred_model, pred_in, pred_out = "predictions.csv";
    gb_pred->add_option("--model", pred_model, "Model file")->required();
    gb_pred->add_option("--in", pred_in, "Feature CSV")->required();
    gb_pred->add_option("--out", pred_out, "Predictions CSV out");
    gb_pred->callback(
        [&] { rc = cmd_gbrt_predict(g, pred_model, pred_in, pred_out); });

    // eval
    auto* eval = app.add_subcommand("eval", "Compute evaluation reports");
    eval->require_subcommand(1);
    static std::string ev_events, ev_truth, ev_trace, ev_log, ev_csv;
    static std::string ev_out = "report";
    static double ev_fps = 30.0, ev_window = 200.0;

    auto* ev_touch = eval->add_subcommand("touch", "Touch-down precision/recall/F1");
    ev_touch->add_option("--events", ev_events, "Event CSV")->required();
    ev_touch->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
    ev_touch->add_option("--fps", ev_fps, "Stream frame rate");
    ev_touch->add_option("--window-ms", ev_window, "Pairing window");
    ev_touch->add_option("--out", ev_out, "Report path prefix");
    ev_touch->callback(
        [&] { rc = cmd_eval_touch(g, ev_events, ev_truth, ev_fps, ev_window, ev_out); });

    auto* ev_spatial = eval->add_subcommand("spatial", "Spatial accuracy");
    ev_spatial->add_option("--events", ev_events, "Event CSV")->required();
    ev_spatial->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
    ev_spatial->add_option("--fps", ev_fps, "Stream frame rate");
    ev_spatial->add_option("--out", ev_out, "Report path prefix");
    ev_spatial->callback(
        [&] { rc = cmd_eval_spatial(g, ev_events, ev_truth, ev_fps, ev_out); });

    auto* ev_hover = eval->add_subcommand("hover", "Hover height MAE");
    ev_hover->add_option("--trace", ev_trace, "State trace CSV")->required();
    ev_hover->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
    ev_hover->add_option("--out", ev_out, "Report path prefix");
    ev_hover->callback([&] { rc = cmd_eval_mae(g, ev_trace, ev_truth, false, ev_out); });

    auto* ev_pressure = eval->add_subcommand("pressure", "Pressure MAE");
    ev_pressure->add_option("--trace", ev_trace, "State trace CSV")->required();
    ev_pressure->add_option("--truth", ev_truth, "Ground-truth CSV")->required();
    ev_pressure->add_option("--out", ev_out, "Report path prefix");
    ev_pressure->callback(
        [&] { rc = cmd_eval_mae(g, ev_trace, ev_truth, true, ev_out); });

    auto* ev_typing = eval->add_subcommand("typing", "Text-entry metrics");
    ev_typing->add_option("--log", ev_log, "Typing log JSON")->required();
    ev_typing->add_option("--out", ev_out, "Report path prefix");
    ev_typing->callback([&] { rc = cmd_eval_typing(g, ev_log, ev_out); });

    auto* ev_chr = eval->add_subcommand("characterize", "Envelope property checks");
    ev_chr->add_option("--csv", ev_csv, "Characterization CSV")->required();
    ev_chr->add_option("--out", ev_out, "Report path prefix");
    ev_chr->callback([&] { rc = cmd_eval_characterize(g, ev_csv, ev_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const ValidationFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::runtime_error& e) {
        // Library-level validation failures: bad formats, bad data.
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return rc;
}

// Pipeline driver: every stage of the sweep-to-animation pipeline as a
// subcommand, composing through documented file formats on disk.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emarig/bake.hpp"
#include "emarig/error.hpp"
#include "emarig/json_io.hpp"
#include "emarig/synth.hpp"

namespace {

using namespace emarig;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct Common {
    std::string config_path;
    bool dry_run = false;
    json config;  // loaded lazily

    void load_config() {
        if (!config_path.empty()) config = load_json_file(config_path);
    }

    // flag > config file > default
    std::string path_option(const CLI::Option* flag, const std::string& flag_value,
                            const std::string& config_key, const std::string& fallback = {}) const {
        if (flag && flag->count() > 0) return flag_value;
        if (config.is_object() && config.contains(config_key)) {
            return config.at(config_key).get<std::string>();
        }
        return fallback;
    }

    template <typename T>
    T value_option(const CLI::Option* flag, T flag_value, const std::string& config_key, T fallback) const {
        if (flag && flag->count() > 0) return flag_value;
        if (config.is_object() && config.contains(config_key)) return config.at(config_key).get<T>();
        return fallback;
    }
};

EmaSweep load_sweep(const std::string& path, double rate_override = 0.0) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return parse_sweep(in, rate_override);
}

Mesh load_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return load_mesh(in);
}

IkSettings load_settings(const std::string& path) {
    if (path.empty()) return IkSettings{};
    return parse_ik_settings(load_json_file(path));
}

// Bound struts and assignments share one schema; offsets default to zero.
std::vector<Strut> load_struts_file(const std::string& path) {
    const json doc = load_json_file(path);
    if (doc.at("format_version").get<int>() != kFormatVersion) {
        throw ParseError("struts '" + path + "': unsupported format_version");
    }
    std::vector<Strut> struts;
    for (const auto& entry : doc.at("struts")) {
        Strut s;
        s.coil_name = entry.at("coil").get<std::string>();
        s.bone_name = entry.at("bone").get<std::string>();
        const std::string end = entry.at("end").get<std::string>();
        if (end != "head" && end != "tail") throw ParseError("bone end must be 'head' or 'tail'");
        s.end = end == "head" ? BoneEnd::Head : BoneEnd::Tail;
        if (entry.contains("offset")) {
            const auto& o = entry.at("offset");
            s.offset = Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>());
        }
        struts.push_back(std::move(s));
    }
    return struts;
}

std::map<std::string, Vec3> auto_reference_pose(const EmaSweep& sweep, const CoilLayout& layout) {
    const std::vector<std::string> refs = layout.reference_names();
    for (long f = 0; f < sweep.frame_count(); ++f) {
        std::map<std::string, Vec3> pose;
        for (const std::string& name : refs) {
            const int c = sweep.coil_index(name);
            if (c < 0 || !sweep.at(f, c).valid) break;
            pose[name] = sweep.at(f, c).position;
        }
        if (pose.size() == refs.size() && pose.size() >= 3) return pose;
    }
    throw Error("no frame with all reference coils valid; provide --ref-pose");
}

int cmd_synth(Common& common, const std::string& rig_path, const std::string& layout_path,
              const std::string& struts_path, const std::string& gesture_path,
              const std::string& ref_pose_path, long cycles, double rate, double sigma_pos,
              double outlier_rate, double dropout_rate, uint64_t seed, double head_rotation,
              double head_translation, double head_period, const std::string& out_path,
              const std::string& truth_path) {
    const Rig rig = parse_rig(load_json_file(rig_path));
    const CoilLayout layout = parse_layout(load_json_file(layout_path));
    const std::vector<Strut> struts = load_struts_file(struts_path);
    std::vector<GestureStep> script = parse_gesture_script(load_json_file(gesture_path), rig);
    const std::map<std::string, Vec3> ref_pose =
        ref_pose_path.empty() ? std::map<std::string, Vec3>{} : parse_point_map(load_json_file(ref_pose_path));

    std::vector<GestureStep> repeated;
    for (long c = 0; c < cycles; ++c) repeated.insert(repeated.end(), script.begin(), script.end());

    NoiseSettings noise;
    noise.sigma_pos = sigma_pos;
    noise.outlier_rate = outlier_rate;
    noise.dropout_rate = dropout_rate;
    HeadMotionSettings head;
    head.rotation_amplitude = head_rotation;
    head.translation_amplitude = head_translation;
    head.period_s = head_period;

    const SynthResult result = generate_gesture(rig, struts, layout, ref_pose, repeated, rate, noise, seed, head);
    if (common.dry_run) return 0;

    std::ofstream out(out_path);
    if (!out) throw Error("cannot open '" + out_path + "' for writing");
    write_sweep(out, result.sweep);
    if (!truth_path.empty()) save_json_file(truth_path, gesture_truth_to_json(result.truth, rate));
    std::cout << "synth: " << result.sweep.frame_count() << " frames, " << result.sweep.coil_count()
              << " coils, " << result.truth.outliers.size() << " outliers, "
              << result.truth.dropouts.size() << " dropouts\n";
    return 0;
}

int cmd_ingest(Common& common, const std::string& in_path, const std::string& layout_path,
               const std::string& ref_pose_path, const std::string& annotations_path,
               const std::string& palate_path, double rate_override, double resample_rate,
               bool no_head_correct, bool no_clean, double max_speed, int median_window,
               const std::string& out_path, const std::string& report_path) {
    EmaSweep sweep = load_sweep(in_path, rate_override);
    json report;

    if (!palate_path.empty()) {
        std::ifstream in(palate_path);
        if (!in) throw Error("cannot open '" + palate_path + "'");
        const PalateTrace trace = parse_palate(in);
        report["palate_points"] = trace.points.size();
    }

    if (!no_head_correct) {
        const CoilLayout layout = parse_layout(load_json_file(layout_path));
        const std::map<std::string, Vec3> ref_pose = ref_pose_path.empty()
                                                          ? auto_reference_pose(sweep, layout)
                                                          : parse_point_map(load_json_file(ref_pose_path));
        HeadCorrectResult corrected = head_correct(sweep, layout, ref_pose);
        sweep = std::move(corrected.sweep);
        report["head_correction"] = head_correct_frames_to_json(corrected.frames);
    }
    if (!no_clean) {
        CleanSettings settings;
        settings.max_speed = max_speed;
        settings.median_window = median_window;
        CleanResult cleaned = clean(sweep, settings);
        sweep = std::move(cleaned.sweep);
        report["clean"] = clean_report_to_json(cleaned.report);
    }
    if (resample_rate > 0.0) sweep = resample(sweep, resample_rate);
    if (!annotations_path.empty()) {
        sweep.annotations() = parse_annotations(load_json_file(annotations_path));
        sweep.validate();
    }

    if (common.dry_run) return 0;
    std::ofstream out(out_path);
    if (!out) throw Error("cannot open '" + out_path + "' for writing");
    write_sweep(out, sweep);
    if (!report_path.empty()) save_json_file(report_path, report);
    std::cout << "ingest: " << sweep.frame_count() << " frames at " << sweep.sample_rate() << " Hz\n";
    return 0;
}

int cmd_bind(Common& common, const std::string& rig_path, const std::string& layout_path,
             const std::string& in_path, long bind_frame, const std::string& assignment_path,
             double max_offset, const std::string& mesh_path, const std::string& mesh_landmarks_path,
             const std::string& ema_landmarks_path, const std::string& transform_path, bool allow_scale,
             double power, int max_influences, double epsilon, const std::string& heatmap_bone,
             const std::string& out_struts, const std::string& out_mesh,
             const std::string& out_weights, const std::string& heatmap_out) {
    const Rig rig = parse_rig(load_json_file(rig_path));
    const CoilLayout layout = parse_layout(load_json_file(layout_path));
    const EmaSweep sweep = load_sweep(in_path);

    std::vector<StrutAssignment> assignment;
    for (const Strut& s : load_struts_file(assignment_path)) {
        assignment.push_back({s.coil_name, s.bone_name, s.end});
    }
    const std::vector<Strut> struts = bind_struts(rig, sweep, layout, bind_frame, assignment, max_offset);

    std::optional<Mesh> mesh;
    std::optional<WeightMap> weights;
    double registration_rms = 0.0;
    if (!mesh_path.empty()) {
        mesh = load_mesh_file(mesh_path);
        if (!transform_path.empty()) {
            // manual registration with an explicit transform
            mesh = transform_mesh(*mesh, parse_similarity(load_json_file(transform_path)));
        } else if (!mesh_landmarks_path.empty() && !ema_landmarks_path.empty()) {
            const auto mesh_lm = parse_point_map(load_json_file(mesh_landmarks_path));
            const auto ema_lm = parse_point_map(load_json_file(ema_landmarks_path));
            std::vector<Vec3> source, target;
            for (const auto& [name, p] : mesh_lm) {
                const auto it = ema_lm.find(name);
                if (it == ema_lm.end()) continue;
                source.push_back(p);
                target.push_back(it->second);
            }
            const RegistrationResult reg = register_landmarks(source, target, allow_scale);
            registration_rms = reg.rms;
            mesh = transform_mesh(*mesh, reg.transform);
        }
        WeightSettings ws;
        ws.power = power;
        ws.max_influences = max_influences;
        ws.epsilon = epsilon;
        weights = auto_weights(*mesh, rig, ws);
    }

    if (common.dry_run) return 0;
    save_json_file(out_struts, struts_to_json(struts));
    if (mesh && !out_mesh.empty()) {
        std::ofstream out(out_mesh);
        if (!out) throw Error("cannot open '" + out_mesh + "' for writing");
        save_mesh(out, *mesh);
    }
    if (weights && !out_weights.empty()) save_json_file(out_weights, weights_to_json(*weights));
    if (weights && !heatmap_bone.empty() && !heatmap_out.empty()) {
        std::ofstream out(heatmap_out);
        if (!out) throw Error("cannot open '" + heatmap_out + "' for writing");
        write_heatmap_csv(out, weight_heatmap(*weights, rig, heatmap_bone));
    }
    std::cout << "bind: " << struts.size() << " struts";
    if (mesh) std::cout << ", mesh " << mesh->vertex_count() << " vertices, registration rms " << registration_rms;
    std::cout << "\n";
    return 0;
}

int cmd_solve(Common& common, CLI::Option* rig_opt, std::string rig_flag, CLI::Option* struts_opt,
              std::string struts_flag, CLI::Option* settings_opt, std::string settings_flag,
              CLI::Option* max_iter_opt, int max_iter_flag, const std::string& in_path,
              const std::string& annotations_path, bool parallel, const std::string& out_path,
              const std::string& report_path) {
    const std::string rig_path = common.path_option(rig_opt, rig_flag, "rig");
    const std::string struts_path = common.path_option(struts_opt, struts_flag, "struts");
    const std::string settings_path = common.path_option(settings_opt, settings_flag, "settings");
    if (rig_path.empty() || struts_path.empty()) throw Error("solve needs --rig and --struts (flags or config)");

    const Rig rig = parse_rig(load_json_file(rig_path));
    const std::vector<Strut> struts = load_struts_file(struts_path);
    IkSettings settings = load_settings(settings_path);
    settings.max_iterations = common.value_option(max_iter_opt, max_iter_flag, "max_iterations",
                                                  settings.max_iterations);
    EmaSweep sweep = load_sweep(in_path);
    if (!annotations_path.empty()) {
        sweep.annotations() = parse_annotations(load_json_file(annotations_path));
        sweep.validate();
    }

    const SweepSolve solve = parallel ? solve_sweep_partitioned(rig, struts, sweep, settings)
                                      : solve_sweep(rig, struts, sweep, settings);
    if (common.dry_run) return 0;
    save_json_file(out_path, sweep_solve_to_json(solve, sweep.sample_rate()));
    if (!report_path.empty()) save_json_file(report_path, solve_report_to_json(solve.report));
    std::cout << "solve: " << solve.frames.size() << " frames, mean residual "
              << solve.report.mean_residual << " mm, " << solve.report.non_converged_frames.size()
              << " non-converged\n";
    return 0;
}

int cmd_actions(Common& common, const std::string& in_path, const std::string& annotations_path,
                const std::string& sweep_id, const std::string& out_dir) {
    const json doc = load_json_file(in_path);
    const PoseTrack track = parse_pose_track(doc);
    const std::vector<Annotation> annotations = parse_annotations(load_json_file(annotations_path));

    std::vector<FrameSolve> solves(track.poses.size());
    for (size_t f = 0; f < track.poses.size(); ++f) solves[f].pose = track.poses[f];
    const std::vector<Action> actions = segment_actions(solves, annotations, track.rate, sweep_id);

    if (common.dry_run) return 0;
    std::filesystem::create_directories(out_dir);
    for (const Action& action : actions) {
        save_json_file((std::filesystem::path(out_dir) / (action.name + ".action.json")).string(),
                       action_to_json(action));
    }
    std::cout << "actions: " << actions.size() << " actions written to " << out_dir << "\n";
    return 0;
}

int cmd_timeline(Common& common, const std::string& timeline_path, const std::string& actions_dir,
                 const std::string& out_path) {
    const Timeline timeline = parse_timeline(load_json_file(timeline_path));
    std::vector<Action> actions;
    for (const auto& entry : std::filesystem::directory_iterator(actions_dir)) {
        if (entry.path().string().ends_with(".action.json")) {
            actions.push_back(parse_action(load_json_file(entry.path().string())));
        }
    }
    Action resolved = resolve_timeline(timeline, actions);
    if (common.dry_run) return 0;
    save_json_file(out_path, action_to_json(resolved));
    std::cout << "timeline: " << resolved.length() << " frames\n";
    return 0;
}

int cmd_bake(Common& common, const std::string& action_path, const std::string& rig_path,
             const std::string& mesh_path, const std::string& weights_path, long stride,
             const std::string& out_path) {
    const Action action = parse_action(load_json_file(action_path));
    const Rig rig = parse_rig(load_json_file(rig_path));
    const Mesh mesh = load_mesh_file(mesh_path);
    const WeightMap weights = parse_weights(load_json_file(weights_path));

    const BakedSequence baked = bake(action, rig, mesh, weights, stride);
    if (common.dry_run) return 0;
    std::ofstream out(out_path);
    if (!out) throw Error("cannot open '" + out_path + "' for writing");
    export_animation(out, baked, rig);
    std::cout << "bake: " << baked.frames.size() << " frames at " << baked.rate << " Hz\n";
    return 0;
}

int cmd_export(Common& common, const std::string& anim_path, const std::string& mesh_path,
               const std::string& weights_path, const std::string& out_dir) {
    std::ifstream in(anim_path);
    if (!in) throw Error("cannot open '" + anim_path + "'");
    const ImportedAnimation anim = import_animation(in);
    const Mesh mesh = load_mesh_file(mesh_path);
    const WeightMap weights = parse_weights(load_json_file(weights_path));

    const std::vector<SegmentTransform> rest = evaluate_rig(anim.rig, rest_pose(anim.rig));
    BakedSequence baked;
    baked.rate = anim.rate;
    for (const auto& segments : anim.frames) {
        BakedFrame frame;
        frame.segments = segments;
        frame.vertices = deform(mesh, weights, rest, segments).vertices;
        baked.frames.push_back(std::move(frame));
    }
    if (common.dry_run) return 0;
    const auto paths = export_obj_sequence(baked, mesh, out_dir);
    std::cout << "export: " << paths.size() << " OBJ frames in " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& in_path) {
    const json doc = load_json_file(in_path);
    const PoseTrack track = parse_pose_track(doc);
    const json& report = doc.at("report");

    long converged = 0;
    for (bool c : track.converged) converged += c ? 1 : 0;
    std::cout << "frames:          " << track.poses.size() << " at " << track.rate << " Hz\n";
    std::cout << "converged:       " << converged << "/" << track.poses.size() << "\n";
    std::cout << "mean residual:   " << report.at("mean_residual").get<double>() << " mm\n";
    std::cout << "max residual:    " << report.at("max_residual").get<double>() << " mm\n";
    std::cout << "volume drift:    " << report.at("max_volume_drift").get<double>() << " (relative)\n";
    std::cout << "mode:            " << report.at("mode").get<std::string>() << "\n";
    const auto& non_converged = report.at("non_converged_frames");
    if (!non_converged.empty()) {
        std::cout << "non-converged:  ";
        for (size_t i = 0; i < non_converged.size() && i < 10; ++i) std::cout << ' ' << non_converged[i];
        if (non_converged.size() > 10) std::cout << " ... (" << non_converged.size() << " total)";
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMA-driven tongue rig animation pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Common common;
    app.add_option("--config", common.config_path, "project configuration JSON");
    app.add_flag("--dry-run", common.dry_run, "validate inputs without writing outputs");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic sweep with ground truth");
    std::string sy_rig, sy_layout, sy_struts, sy_gesture, sy_ref, sy_out, sy_truth;
    long sy_cycles = 1;
    double sy_rate = 200.0, sy_sigma = 0.0, sy_outlier = 0.0, sy_dropout = 0.0;
    double sy_head_rot = 0.0, sy_head_trans = 0.0, sy_head_period = 4.0;
    uint64_t sy_seed = 1;
    synth->add_option("--rig", sy_rig)->required();
    synth->add_option("--layout", sy_layout)->required();
    synth->add_option("--struts", sy_struts)->required();
    synth->add_option("--gesture", sy_gesture)->required();
    synth->add_option("--ref-pose", sy_ref, "reference coil positions JSON");
    synth->add_option("--cycles", sy_cycles, "script repetitions");
    synth->add_option("--rate", sy_rate, "sample rate in Hz");
    synth->add_option("--sigma-pos", sy_sigma, "position noise sigma in mm");
    synth->add_option("--outlier-rate", sy_outlier);
    synth->add_option("--dropout-rate", sy_dropout);
    synth->add_option("--seed", sy_seed);
    synth->add_option("--head-rotation", sy_head_rot, "head motion amplitude in radians");
    synth->add_option("--head-translation", sy_head_trans, "head motion amplitude in mm");
    synth->add_option("--head-period", sy_head_period, "head motion period in seconds");
    synth->add_option("--out", sy_out)->required();
    synth->add_option("--truth", sy_truth, "ground truth JSON");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse, head-correct and clean a sweep");
    std::string in_in, in_layout, in_ref, in_ann, in_palate, in_out, in_report;
    double in_rate = 0.0, in_resample = 0.0, in_max_speed = 500.0;
    int in_window = 5;
    bool in_no_hc = false, in_no_clean = false;
    ingest->add_option("--in", in_in)->required();
    ingest->add_option("--layout", in_layout);
    ingest->add_option("--ref-pose", in_ref, "reference pose JSON (default: first all-valid frame)");
    ingest->add_option("--annotations", in_ann);
    ingest->add_option("--palate", in_palate, "palate trace to validate and report");
    ingest->add_option("--rate-override", in_rate);
    ingest->add_option("--resample", in_resample, "target rate in Hz");
    ingest->add_flag("--no-head-correct", in_no_hc);
    ingest->add_flag("--no-clean", in_no_clean);
    ingest->add_option("--max-speed", in_max_speed, "mm/s outlier threshold");
    ingest->add_option("--median-window", in_window, "odd frame count");
    ingest->add_option("--out", in_out)->required();
    ingest->add_option("--report", in_report);

    // bind
    auto* bind = app.add_subcommand("bind", "bind struts, register mesh, compute weights");
    std::string bi_rig, bi_layout, bi_in, bi_assign, bi_mesh, bi_mesh_lm, bi_ema_lm;
    std::string bi_out_struts, bi_out_mesh, bi_out_weights, bi_heatmap_bone, bi_heatmap_out;
    long bi_frame = 0;
    bool bi_scale = false;
    double bi_power = 2.0, bi_epsilon = 0.5;
    int bi_max_inf = 4;
    bind->add_option("--rig", bi_rig)->required();
    bind->add_option("--layout", bi_layout)->required();
    bind->add_option("--in", bi_in, "bind sweep CSV")->required();
    bind->add_option("--bind-frame", bi_frame);
    bind->add_option("--assignment", bi_assign, "strut assignment JSON")->required();
    bind->add_option("--mesh", bi_mesh, "tongue mesh OBJ");
    bind->add_option("--mesh-landmarks", bi_mesh_lm);
    bind->add_option("--ema-landmarks", bi_ema_lm);
    bind->add_flag("--allow-scale", bi_scale, "similarity instead of rigid registration");
    bind->add_option("--power", bi_power, "inverse-distance weight power");
    bind->add_option("--max-influences", bi_max_inf);
    bind->add_option("--epsilon", bi_epsilon, "mm");
    bind->add_option("--heatmap", bi_heatmap_bone, "bone name for influence heat map");
    bind->add_option("--out-struts", bi_out_struts)->required();
    bind->add_option("--out-mesh", bi_out_mesh);
    bind->add_option("--out-weights", bi_out_weights);
    bind->add_option("--heatmap-out", bi_heatmap_out);

    // solve
    auto* solve = app.add_subcommand("solve", "per-frame IK over a sweep");
    std::string so_rig, so_struts, so_settings, so_in, so_ann, so_out, so_report;
    int so_max_iter = 50;
    bool so_parallel = false;
    CLI::Option* so_rig_opt = solve->add_option("--rig", so_rig);
    CLI::Option* so_struts_opt = solve->add_option("--struts", so_struts, "bound struts JSON");
    CLI::Option* so_settings_opt = solve->add_option("--settings", so_settings);
    CLI::Option* so_max_iter_opt = solve->add_option("--max-iterations", so_max_iter);
    solve->add_option("--in", so_in)->required();
    solve->add_option("--annotations", so_ann, "annotation JSON, used as partition boundaries");
    solve->add_flag("--parallel", so_parallel, "partitioned solve at annotation boundaries");
    solve->add_option("--out", so_out)->required();
    solve->add_option("--report", so_report);

    // actions
    auto* actions = app.add_subcommand("actions", "segment a solved sweep into actions");
    std::string ac_in, ac_ann, ac_id, ac_dir;
    actions->add_option("--in", ac_in, "solved poses JSON")->required();
    actions->add_option("--annotations", ac_ann)->required();
    actions->add_option("--sweep-id", ac_id);
    actions->add_option("--out-dir", ac_dir)->required();

    // timeline
    auto* timeline = app.add_subcommand("timeline", "resolve a timeline into one action");
    std::string tl_timeline, tl_dir, tl_out;
    timeline->add_option("--timeline", tl_timeline)->required();
    timeline->add_option("--actions-dir", tl_dir)->required();
    timeline->add_option("--out", tl_out)->required();

    // bake
    auto* bake_cmd = app.add_subcommand("bake", "bake an action through skinning");
    std::string ba_action, ba_rig, ba_mesh, ba_weights, ba_out;
    long ba_stride = 1;
    bake_cmd->add_option("--action", ba_action)->required();
    bake_cmd->add_option("--rig", ba_rig)->required();
    bake_cmd->add_option("--mesh", ba_mesh)->required();
    bake_cmd->add_option("--weights", ba_weights)->required();
    bake_cmd->add_option("--stride", ba_stride);
    bake_cmd->add_option("--out", ba_out, "animation JSON")->required();

    // export
    auto* export_cmd = app.add_subcommand("export", "re-skin an animation JSON into an OBJ sequence");
    std::string ex_anim, ex_mesh, ex_weights, ex_dir;
    export_cmd->add_option("--anim", ex_anim)->required();
    export_cmd->add_option("--mesh", ex_mesh)->required();
    export_cmd->add_option("--weights", ex_weights)->required();
    export_cmd->add_option("--out-dir", ex_dir)->required();

    // report
    auto* report = app.add_subcommand("report", "summarize a solved sweep");
    std::string re_in;
    report->add_option("--in", re_in)->required();

    // let --config / --dry-run appear after the subcommand too
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    }

    try {
        common.load_config();
        if (synth->parsed()) {
            return cmd_synth(common, sy_rig, sy_layout, sy_struts, sy_gesture, sy_ref, sy_cycles, sy_rate,
                             sy_sigma, sy_outlier, sy_dropout, sy_seed, sy_head_rot, sy_head_trans,
                             sy_head_period, sy_out, sy_truth);
        }
        if (ingest->parsed()) {
            return cmd_ingest(common, in_in, in_layout, in_ref, in_ann, in_palate, in_rate, in_resample,
                              in_no_hc, in_no_clean, in_max_speed, in_window, in_out, in_report);
        }
        if (bind->parsed()) {
            return cmd_bind(common, bi_rig, bi_layout, bi_in, bi_frame, bi_assign, bi_mesh, bi_mesh_lm,
                            bi_ema_lm, bi_scale, bi_power, bi_max_inf, bi_epsilon, bi_heatmap_bone,
                            bi_out_struts, bi_out_mesh, bi_out_weights, bi_heatmap_out);
        }
        if (solve->parsed()) {
            return cmd_solve(common, so_rig_opt, so_rig, so_struts_opt, so_struts, so_settings_opt,
                             so_settings, so_max_iter_opt, so_max_iter, so_in, so_ann, so_parallel,
                             so_out, so_report);
        }
        if (actions->parsed()) return cmd_actions(common, ac_in, ac_ann, ac_id, ac_dir);
        if (timeline->parsed()) return cmd_timeline(common, tl_timeline, tl_dir, tl_out);
        if (bake_cmd->parsed()) {
            return cmd_bake(common, ba_action, ba_rig, ba_mesh, ba_weights, ba_stride, ba_out);
        }
        if (export_cmd->parsed()) return cmd_export(common, ex_anim, ex_mesh, ex_weights, ex_dir);
        if (report->parsed()) return cmd_report(re_in);
    } catch (const ParseError& e) {
        std::cerr << json{{"error", {{"type", "parse"}, {"message", e.what()}, {"line", e.line()}}}}.dump()
                  << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
    return 0;
}

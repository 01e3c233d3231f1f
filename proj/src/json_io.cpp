#include "emarig/json_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emarig/error.hpp"

namespace emarig {

namespace {

using nlohmann::json;

Vec3 vec3_from(const json& doc) {
    if (!doc.is_array() || doc.size() != 3) throw ParseError("expected [x, y, z]");
    return Vec3(doc.at(0).get<double>(), doc.at(1).get<double>(), doc.at(2).get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void check_version(const json& doc, const char* what) {
    if (!doc.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
    if (doc.at("format_version").get<int>() != kFormatVersion) {
        throw ParseError(std::string(what) + ": unsupported format_version");
    }
}

BoneEnd parse_end(const std::string& end) {
    if (end == "head") return BoneEnd::Head;
    if (end == "tail") return BoneEnd::Tail;
    throw ParseError("bone end must be 'head' or 'tail', got '" + end + "'");
}

std::string end_name(BoneEnd end) { return end == BoneEnd::Head ? "head" : "tail"; }

json pose_rows(const Pose& pose) {
    json rows = json::array();
    for (const BonePose& b : pose.bones) {
        rows.push_back(json::array({b.head.x(), b.head.y(), b.head.z(), b.tail.x(), b.tail.y(), b.tail.z(),
                                    b.head_twist, b.tail_twist, b.stretch}));
    }
    return rows;
}

Pose pose_from_rows(const json& rows) {
    Pose pose;
    for (const auto& row : rows) {
        if (!row.is_array() || row.size() != 9) throw ParseError("pose row must have 9 values");
        BonePose b;
        b.head = Vec3(row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>());
        b.tail = Vec3(row.at(3).get<double>(), row.at(4).get<double>(), row.at(5).get<double>());
        b.head_twist = row.at(6).get<double>();
        b.tail_twist = row.at(7).get<double>();
        b.stretch = row.at(8).get<double>();
        pose.bones.push_back(b);
    }
    return pose;
}

}  // namespace

Rig parse_rig(const nlohmann::json& doc) {
    check_version(doc, "rig");
    std::vector<BBone> bones;
    for (const auto& entry : doc.at("bones")) {
        BBone bone;
        bone.name = entry.at("name").get<std::string>();
        if (entry.contains("parent") && !entry.at("parent").is_null()) {
            bone.parent = entry.at("parent").get<std::string>();
        }
        bone.rest_head = vec3_from(entry.at("head"));
        bone.rest_tail = vec3_from(entry.at("tail"));
        bone.rest_roll = entry.value("roll", 0.0);
        bone.segments = entry.value("segments", 8);
        bone.ease_in = entry.value("ease_in", 1.0);
        bone.ease_out = entry.value("ease_out", 1.0);
        bone.rest_radius = entry.value("radius", 3.0);
        bones.push_back(std::move(bone));
    }
    return Rig(std::move(bones));
}

nlohmann::json rig_to_json(const Rig& rig) {
    json bones = json::array();
    for (const BBone& b : rig.bones()) {
        json entry{{"name", b.name},
                   {"head", vec3_to(b.rest_head)},
                   {"tail", vec3_to(b.rest_tail)},
                   {"roll", b.rest_roll},
                   {"segments", b.segments},
                   {"ease_in", b.ease_in},
                   {"ease_out", b.ease_out},
                   {"radius", b.rest_radius}};
        entry["parent"] = b.parent ? json(*b.parent) : json(nullptr);
        bones.push_back(std::move(entry));
    }
    return json{{"format_version", kFormatVersion}, {"bones", std::move(bones)}};
}

CoilLayout parse_layout(const nlohmann::json& doc) {
    check_version(doc, "layout");
    CoilLayout layout;
    for (const auto& [name, role] : doc.at("coils").items()) {
        layout.entries.emplace_back(name, parse_coil_role(role.get<std::string>()));
    }
    return layout;
}

nlohmann::json layout_to_json(const CoilLayout& layout) {
    json coils = json::object();
    for (const auto& [name, role] : layout.entries) coils[name] = coil_role_name(role);
    return json{{"format_version", kFormatVersion}, {"coils", std::move(coils)}};
}

std::vector<StrutAssignment> parse_strut_assignment(const nlohmann::json& doc) {
    check_version(doc, "strut assignment");
    std::vector<StrutAssignment> assignment;
    for (const auto& entry : doc.at("struts")) {
        StrutAssignment a;
        a.coil_name = entry.at("coil").get<std::string>();
        a.bone_name = entry.at("bone").get<std::string>();
        a.end = parse_end(entry.at("end").get<std::string>());
        assignment.push_back(std::move(a));
    }
    return assignment;
}

std::vector<Strut> parse_struts(const nlohmann::json& doc) {
    check_version(doc, "struts");
    std::vector<Strut> struts;
    for (const auto& entry : doc.at("struts")) {
        Strut s;
        s.coil_name = entry.at("coil").get<std::string>();
        s.bone_name = entry.at("bone").get<std::string>();
        s.end = parse_end(entry.at("end").get<std::string>());
        s.offset = vec3_from(entry.at("offset"));
        struts.push_back(std::move(s));
    }
    return struts;
}

nlohmann::json struts_to_json(const std::vector<Strut>& struts) {
    json entries = json::array();
    for (const Strut& s : struts) {
        entries.push_back({{"coil", s.coil_name},
                           {"bone", s.bone_name},
                           {"end", end_name(s.end)},
                           {"offset", vec3_to(s.offset)}});
    }
    return json{{"format_version", kFormatVersion}, {"struts", std::move(entries)}};
}

IkSettings parse_ik_settings(const nlohmann::json& doc) {
    check_version(doc, "ik settings");
    IkSettings s;
    s.max_iterations = doc.value("max_iterations", s.max_iterations);
    s.damping = doc.value("damping", s.damping);
    s.position_tolerance = doc.value("position_tolerance_mm", s.position_tolerance);
    s.direction_weight = doc.value("direction_weight", s.direction_weight);
    s.temporal_weight = doc.value("temporal_weight", s.temporal_weight);
    s.rest_weight = doc.value("rest_weight", s.rest_weight);
    s.volume_tolerance = doc.value("volume_tolerance", s.volume_tolerance);
    s.pin_root = doc.value("pin_root", s.pin_root);
    if (s.max_iterations < 1) throw ParseError("max_iterations must be >= 1");
    if (!(s.position_tolerance > 0.0)) throw ParseError("position_tolerance_mm must be positive");
    if (s.damping < 0.0 || s.direction_weight < 0.0 || s.temporal_weight < 0.0 || s.rest_weight < 0.0) {
        throw ParseError("ik weights must be non-negative");
    }
    return s;
}

nlohmann::json ik_settings_to_json(const IkSettings& s) {
    return json{{"format_version", kFormatVersion},
                {"max_iterations", s.max_iterations},
                {"damping", s.damping},
                {"position_tolerance_mm", s.position_tolerance},
                {"direction_weight", s.direction_weight},
                {"temporal_weight", s.temporal_weight},
                {"rest_weight", s.rest_weight},
                {"volume_tolerance", s.volume_tolerance},
                {"pin_root", s.pin_root}};
}

std::map<std::string, Vec3> parse_point_map(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("expected an object of name -> [x, y, z]");
    std::map<std::string, Vec3> points;
    for (const auto& [name, value] : doc.items()) {
        if (name == "format_version") continue;
        points[name] = vec3_from(value);
    }
    return points;
}

nlohmann::json point_map_to_json(const std::map<std::string, Vec3>& points) {
    json doc = json::object();
    for (const auto& [name, p] : points) doc[name] = vec3_to(p);
    return doc;
}

SimilarityTransform parse_similarity(const nlohmann::json& doc) {
    SimilarityTransform t;
    t.scale = doc.value("scale", 1.0);
    if (!(t.scale > 0.0)) throw ParseError("similarity scale must be positive");
    if (doc.contains("rotation")) {
        const auto& q = doc.at("rotation");
        if (!q.is_array() || q.size() != 4) throw ParseError("rotation must be a quaternion [w, x, y, z]");
        Quat quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
        if (quat.norm() < 1e-9) throw ParseError("rotation quaternion has zero norm");
        quat.normalize();
        t.rotation = quat.toRotationMatrix();
    }
    if (doc.contains("translation")) t.translation = vec3_from(doc.at("translation"));
    return t;
}

nlohmann::json similarity_to_json(const SimilarityTransform& transform) {
    Quat q(transform.rotation);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return json{{"scale", transform.scale},
                {"rotation", {q.w(), q.x(), q.y(), q.z()}},
                {"translation", vec3_to(transform.translation)}};
}

std::vector<Annotation> parse_annotations(const nlohmann::json& doc) {
    if (!doc.is_array()) throw ParseError("annotations must be a JSON list");
    std::vector<Annotation> annotations;
    for (const auto& entry : doc) {
        Annotation a;
        a.label = entry.at("label").get<std::string>();
        a.start_frame = entry.at("start_frame").get<long>();
        a.end_frame = entry.at("end_frame").get<long>();
        annotations.push_back(std::move(a));
    }
    return annotations;
}

nlohmann::json annotations_to_json(const std::vector<Annotation>& annotations) {
    json doc = json::array();
    for (const Annotation& a : annotations) {
        doc.push_back({{"label", a.label}, {"start_frame", a.start_frame}, {"end_frame", a.end_frame}});
    }
    return doc;
}

nlohmann::json pose_to_json(const Pose& pose) { return pose_rows(pose); }

Pose parse_pose(const nlohmann::json& doc) { return pose_from_rows(doc); }

nlohmann::json sweep_solve_to_json(const SweepSolve& solve, double rate) {
    json frames = json::array();
    for (const FrameSolve& fs : solve.frames) {
        frames.push_back({{"pose", pose_rows(fs.pose)},
                          {"residual_rms", fs.residual_rms},
                          {"converged", fs.converged},
                          {"iterations", fs.iterations}});
    }
    return json{{"format_version", kFormatVersion},
                {"rate", rate},
                {"report", solve_report_to_json(solve.report)},
                {"frames", std::move(frames)}};
}

PoseTrack parse_pose_track(const nlohmann::json& doc) {
    check_version(doc, "pose track");
    PoseTrack track;
    track.rate = doc.at("rate").get<double>();
    for (const auto& frame : doc.at("frames")) {
        track.poses.push_back(pose_from_rows(frame.at("pose")));
        track.converged.push_back(frame.at("converged").get<bool>());
        track.residuals.push_back(frame.at("residual_rms").get<double>());
    }
    return track;
}

nlohmann::json solve_report_to_json(const SolveReport& report) {
    return json{{"mean_residual", report.mean_residual},
                {"max_residual", report.max_residual},
                {"non_converged_frames", report.non_converged_frames},
                {"max_volume_drift", report.max_volume_drift},
                {"mode", report.mode}};
}

Action parse_action(const nlohmann::json& doc) {
    check_version(doc, "action");
    Action action;
    action.name = doc.at("name").get<std::string>();
    action.rate = doc.at("rate").get<double>();
    if (doc.contains("source")) {
        const auto& src = doc.at("source");
        action.source.sweep_id = src.value("sweep_id", std::string());
        action.source.start_frame = src.value("start_frame", 0L);
        action.source.end_frame = src.value("end_frame", 0L);
    }
    for (const auto& frame : doc.at("frames")) action.frames.push_back(pose_from_rows(frame));
    if (action.frames.empty()) throw ParseError("action '" + action.name + "' has no frames");
    return action;
}

nlohmann::json action_to_json(const Action& action) {
    json frames = json::array();
    for (const Pose& pose : action.frames) frames.push_back(pose_rows(pose));
    return json{{"format_version", kFormatVersion},
                {"name", action.name},
                {"rate", action.rate},
                {"source",
                 {{"sweep_id", action.source.sweep_id},
                  {"start_frame", action.source.start_frame},
                  {"end_frame", action.source.end_frame}}},
                {"frames", std::move(frames)}};
}

Timeline parse_timeline(const nlohmann::json& doc) {
    check_version(doc, "timeline");
    Timeline timeline;
    for (const auto& entry : doc.at("entries")) {
        TimelineEntry e;
        e.action = entry.at("action").get<std::string>();
        e.crossfade_frames = entry.value("crossfade_frames", 0L);
        timeline.entries.push_back(std::move(e));
    }
    return timeline;
}

nlohmann::json timeline_to_json(const Timeline& timeline) {
    json entries = json::array();
    for (const TimelineEntry& e : timeline.entries) {
        entries.push_back({{"action", e.action}, {"crossfade_frames", e.crossfade_frames}});
    }
    return json{{"format_version", kFormatVersion}, {"entries", std::move(entries)}};
}

std::vector<GestureStep> parse_gesture_script(const nlohmann::json& doc, const Rig& rig) {
    check_version(doc, "gesture script");
    std::vector<GestureStep> script;
    for (const auto& entry : doc.at("entries")) {
        GestureStep step;
        step.hold_frames = entry.value("hold", 0L);
        step.transition_frames = entry.value("transition", 0L);
        if (step.hold_frames < 0 || step.transition_frames < 0) throw ParseError("negative frame count in script");

        // Per-joint position deltas from rest; connected bones move together.
        std::vector<Vec3> joints(rig.joint_count());
        for (int j = 0; j < rig.joint_count(); ++j) joints[j] = rig.rest_joint(j);
        if (entry.contains("pose")) {
            for (const auto& [joint_name, delta] : entry.at("pose").items()) {
                const int joint = rig.joint_by_name(joint_name);
                if (joint < 0) throw ParseError("unknown joint '" + joint_name + "' in gesture script");
                joints[joint] += vec3_from(delta);
            }
        }
        Pose pose;
        pose.bones.resize(rig.bone_count());
        for (int b = 0; b < rig.bone_count(); ++b) {
            pose.bones[b].head = joints[rig.head_joint(b)];
            pose.bones[b].tail = joints[rig.tail_joint(b)];
            pose.bones[b].stretch = (pose.bones[b].tail - pose.bones[b].head).norm() / rig.bone(b).rest_length();
        }
        if (entry.contains("twists")) {
            for (const auto& [bone_name, twist] : entry.at("twists").items()) {
                const int b = rig.bone_index(bone_name);
                if (b < 0) throw ParseError("unknown bone '" + bone_name + "' in gesture script");
                pose.bones[b].head_twist = twist.at(0).get<double>();
                pose.bones[b].tail_twist = twist.at(1).get<double>();
            }
        }
        step.target = std::move(pose);
        script.push_back(std::move(step));
    }
    if (script.empty()) throw ParseError("gesture script has no entries");
    return script;
}

nlohmann::json gesture_truth_to_json(const GestureTruth& truth, double rate) {
    json poses = json::array();
    for (const Pose& pose : truth.poses) poses.push_back(pose_rows(pose));
    json outliers = json::array();
    for (const InjectionRecord& r : truth.outliers) outliers.push_back({{"frame", r.frame}, {"coil", r.coil}});
    json dropouts = json::array();
    for (const InjectionRecord& r : truth.dropouts) dropouts.push_back({{"frame", r.frame}, {"coil", r.coil}});
    return json{{"format_version", kFormatVersion},
                {"rate", rate},
                {"poses", std::move(poses)},
                {"outliers", std::move(outliers)},
                {"dropouts", std::move(dropouts)}};
}

GestureTruth parse_gesture_truth(const nlohmann::json& doc) {
    check_version(doc, "gesture truth");
    GestureTruth truth;
    for (const auto& rows : doc.at("poses")) truth.poses.push_back(pose_from_rows(rows));
    for (const auto& r : doc.at("outliers")) {
        truth.outliers.push_back({r.at("frame").get<long>(), r.at("coil").get<std::string>()});
    }
    for (const auto& r : doc.at("dropouts")) {
        truth.dropouts.push_back({r.at("frame").get<long>(), r.at("coil").get<std::string>()});
    }
    return truth;
}

WeightMap parse_weights(const nlohmann::json& doc) {
    check_version(doc, "weights");
    WeightMap weights;
    for (const auto& vertex : doc.at("vertices")) {
        std::vector<VertexInfluence> influences;
        for (const auto& inf : vertex) {
            influences.push_back({inf.at(0).get<int>(), inf.at(1).get<double>()});
        }
        weights.vertices.push_back(std::move(influences));
    }
    return weights;
}

nlohmann::json weights_to_json(const WeightMap& weights) {
    json vertices = json::array();
    for (const auto& influences : weights.vertices) {
        json row = json::array();
        for (const VertexInfluence& inf : influences) row.push_back(json::array({inf.segment, inf.weight}));
        vertices.push_back(std::move(row));
    }
    return json{{"format_version", kFormatVersion}, {"vertices", std::move(vertices)}};
}

nlohmann::json clean_report_to_json(const CleanReport& report) {
    json repairs = json::array();
    for (const Repair& r : report.repairs) {
        repairs.push_back({{"coil", r.coil},
                           {"first_frame", r.first_frame},
                           {"last_frame", r.last_frame},
                           {"reason", repair_reason_name(r.reason)}});
    }
    return json{{"repairs", std::move(repairs)},
                {"flagged_samples", report.flagged_samples},
                {"filled_samples", report.filled_samples}};
}

nlohmann::json head_correct_frames_to_json(const std::vector<FrameCorrection>& frames) {
    json doc = json::array();
    for (const FrameCorrection& f : frames) {
        doc.push_back({{"residual_rms", f.residual_rms}, {"borrowed", f.borrowed}});
    }
    return doc;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        json doc;
        in >> doc;
        return doc;
    } catch (const json::exception& e) {
        throw ParseError("invalid JSON in '" + path + "': " + e.what());
    }
}

void save_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << doc.dump(1, '\t') << "\n";
    if (!out.good()) throw Error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out.good()) throw Error("write failed for '" + path + "'");
}

}  // namespace emarig

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "emarig/ik.hpp"
#include "emarig/nla.hpp"
#include "emarig/rig.hpp"
#include "emarig/skin.hpp"
#include "emarig/synth.hpp"

namespace emarig {

// All on-disk JSON documents carry a format_version field; readers reject
// versions they do not understand.
inline constexpr int kFormatVersion = 1;

Rig parse_rig(const nlohmann::json& doc);
nlohmann::json rig_to_json(const Rig& rig);

CoilLayout parse_layout(const nlohmann::json& doc);
nlohmann::json layout_to_json(const CoilLayout& layout);

std::vector<StrutAssignment> parse_strut_assignment(const nlohmann::json& doc);
std::vector<Strut> parse_struts(const nlohmann::json& doc);
nlohmann::json struts_to_json(const std::vector<Strut>& struts);

IkSettings parse_ik_settings(const nlohmann::json& doc);
nlohmann::json ik_settings_to_json(const IkSettings& settings);

std::map<std::string, Vec3> parse_point_map(const nlohmann::json& doc);  // name -> [x,y,z]
nlohmann::json point_map_to_json(const std::map<std::string, Vec3>& points);

// {scale, rotation: [w,x,y,z], translation: [x,y,z]} for manual registration.
SimilarityTransform parse_similarity(const nlohmann::json& doc);
nlohmann::json similarity_to_json(const SimilarityTransform& transform);

std::vector<Annotation> parse_annotations(const nlohmann::json& doc);
nlohmann::json annotations_to_json(const std::vector<Annotation>& annotations);

nlohmann::json pose_to_json(const Pose& pose);
Pose parse_pose(const nlohmann::json& doc);

// Solved sweep: rate, per-frame poses and diagnostics.
nlohmann::json sweep_solve_to_json(const SweepSolve& solve, double rate);
struct PoseTrack {
    double rate = 0.0;
    std::vector<Pose> poses;
    std::vector<bool> converged;
    std::vector<double> residuals;
};
PoseTrack parse_pose_track(const nlohmann::json& doc);

nlohmann::json solve_report_to_json(const SolveReport& report);

Action parse_action(const nlohmann::json& doc);
nlohmann::json action_to_json(const Action& action);

Timeline parse_timeline(const nlohmann::json& doc);
nlohmann::json timeline_to_json(const Timeline& timeline);

std::vector<GestureStep> parse_gesture_script(const nlohmann::json& doc, const Rig& rig);

nlohmann::json gesture_truth_to_json(const GestureTruth& truth, double rate);
GestureTruth parse_gesture_truth(const nlohmann::json& doc);

WeightMap parse_weights(const nlohmann::json& doc);
nlohmann::json weights_to_json(const WeightMap& weights);

nlohmann::json clean_report_to_json(const CleanReport& report);
nlohmann::json head_correct_frames_to_json(const std::vector<FrameCorrection>& frames);

// File helpers; errors carry the path.
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& doc);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace emarig

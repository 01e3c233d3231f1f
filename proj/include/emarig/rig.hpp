#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emarig/ema.hpp"
#include "emarig/geom.hpp"

namespace emarig {

// Deformable bone: a cubic Hermite curve between its endpoints, discretized
// into segments for skinning. Lengths in mm, angles in radians.
struct BBone {
    std::string name;
    std::optional<std::string> parent;
    Vec3 rest_head = Vec3::Zero();
    Vec3 rest_tail = Vec3::Zero();
    double rest_roll = 0.0;
    int segments = 8;
    double ease_in = 1.0;
    double ease_out = 1.0;
    double rest_radius = 3.0;

    double rest_length() const { return (rest_tail - rest_head).norm(); }
    Vec3 rest_axis() const { return (rest_tail - rest_head).normalized(); }
};

enum class BoneEnd { Head, Tail };

// Connected tree of B-bones: one central chain plus lateral branches.
// Joints are shared endpoints; joint 0 is the root head, joint b+1 the tail
// of bone b.
class Rig {
public:
    Rig() = default;
    explicit Rig(std::vector<BBone> bones);  // validates, throws on bad topology

    const std::vector<BBone>& bones() const { return bones_; }
    int bone_count() const { return static_cast<int>(bones_.size()); }
    int bone_index(const std::string& name) const;  // -1 when absent
    const BBone& bone(int i) const { return bones_[i]; }

    int root() const { return root_; }
    int parent(int bone) const { return parent_[bone]; }
    const std::vector<int>& children(int bone) const { return children_[bone]; }

    int joint_count() const { return bone_count() + 1; }
    int head_joint(int bone) const { return parent_[bone] < 0 ? 0 : parent_[bone] + 1; }
    int tail_joint(int bone) const { return bone + 1; }
    Vec3 rest_joint(int joint) const { return joint == 0 ? bones_[root_].rest_head : bones_[joint - 1].rest_tail; }
    std::string joint_name(int joint) const;
    int joint_by_name(const std::string& name) const;  // "<bone>.tail" or "<root>.head"

    int total_segments() const { return total_segments_; }
    int segment_base(int bone) const { return segment_base_[bone]; }  // flat segment id offset

private:
    std::vector<BBone> bones_;
    std::vector<int> parent_;
    std::vector<std::vector<int>> children_;
    std::vector<int> segment_base_;
    int root_ = -1;
    int total_segments_ = 0;
};

// Adaptation link binding one coil to one bone endpoint. The offset is the
// bind-time vector from coil to endpoint, expressed in the coil's frame.
struct Strut {
    std::string coil_name;
    std::string bone_name;
    BoneEnd end = BoneEnd::Tail;
    Vec3 offset = Vec3::Zero();
};

struct BonePose {
    Vec3 head = Vec3::Zero();
    Vec3 tail = Vec3::Zero();
    double head_twist = 0.0;
    double tail_twist = 0.0;
    double stretch = 1.0;  // current length / rest length
};

// Solved rig state for one frame, indexed like Rig::bones().
struct Pose {
    std::vector<BonePose> bones;

    bool finite() const;
};

Pose rest_pose(const Rig& rig);

// Per-segment placement: origin and frame sampled at the segment midpoint,
// axial scale = local arc-length ratio, cross scale = 1/sqrt(stretch) so
// bone volume is conserved under stretch.
struct SegmentTransform {
    Vec3 origin = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    double scale_axial = 1.0;
    double scale_cross = 1.0;
};

struct BoneCurve {
    std::vector<SegmentTransform> segments;  // bone.segments entries
    std::vector<Vec3> boundaries;            // bone.segments + 1 curve points
};

// Hermite handles for a posed bone: the rest axis carried by the shortest-arc
// rotation of the joint direction from rest to pose, scaled by rest length
// and ease.
struct BoneHandles {
    Vec3 head_tangent;  // includes length and ease
    Vec3 tail_tangent;
    Vec3 head_dir;      // unit curve tangent at s=0
    Vec3 tail_dir;      // unit curve tangent at s=1
};

BoneHandles bone_handles(const Rig& rig, int bone, const Pose& pose);

// Unit curve tangent at one end of a posed bone (the direction residual the
// IK aligns with a coil axis).
Vec3 end_tangent(const Rig& rig, int bone, BoneEnd end, const Pose& pose);

// Rest-pose joint direction at a bone end: central difference through the
// joint when a neighbor exists, the bone chord otherwise.
Vec3 rest_joint_direction(const Rig& rig, int bone, BoneEnd end);

BoneCurve evaluate_bbone(const Rig& rig, int bone, const Pose& pose);

// Flat evaluation of all bones; segment i of bone b lands at
// rig.segment_base(b) + i.
std::vector<SegmentTransform> evaluate_rig(const Rig& rig, const Pose& pose);

struct StrutTarget {
    int bone = -1;
    BoneEnd end = BoneEnd::Tail;
    Vec3 position = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    double weight = 0.0;  // 0 for invalid samples
    std::string coil_name;
};

// Strut assignment prior to binding: which coil drives which bone endpoint.
struct StrutAssignment {
    std::string coil_name;
    std::string bone_name;
    BoneEnd end = BoneEnd::Tail;
};

// Computes bind offsets so that struts reproduce the rest endpoints exactly
// when the coils are at their bind positions.
std::vector<Strut> bind_struts(const Rig& rig, const EmaSweep& sweep, const CoilLayout& layout,
                               long bind_frame, const std::vector<StrutAssignment>& assignment,
                               double max_offset = 30.0);

std::vector<StrutTarget> strut_targets(const Rig& rig, const std::vector<Strut>& struts,
                                       const EmaSweep& sweep, long frame);

}  // namespace emarig

#include "emarig/rig.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "emarig/error.hpp"

namespace emarig {

namespace {

// Joint direction through a bone end, the central-difference direction when
// a neighbor exists and the chord otherwise. Same rule for rest and posed
// positions so the rest pose always yields the identity rotation.
Vec3 joint_direction_rest(const Rig& rig, int bone, BoneEnd end) {
    const BBone& b = rig.bone(bone);
    if (end == BoneEnd::Head) {
        const int p = rig.parent(bone);
        if (p >= 0) return (b.rest_tail - rig.bone(p).rest_head).normalized();
        return b.rest_axis();
    }
    const auto& kids = rig.children(bone);
    if (!kids.empty()) {
        Vec3 mean = Vec3::Zero();
        for (int c : kids) mean += rig.bone(c).rest_tail;
        mean /= double(kids.size());
        return (mean - b.rest_head).normalized();
    }
    return b.rest_axis();
}

Vec3 joint_direction_posed(const Rig& rig, int bone, BoneEnd end, const Pose& pose) {
    const BonePose& bp = pose.bones[bone];
    if (end == BoneEnd::Head) {
        const int p = rig.parent(bone);
        if (p >= 0) return (bp.tail - pose.bones[p].head).normalized();
        return (bp.tail - bp.head).normalized();
    }
    const auto& kids = rig.children(bone);
    if (!kids.empty()) {
        Vec3 mean = Vec3::Zero();
        for (int c : kids) mean += pose.bones[c].tail;
        mean /= double(kids.size());
        return (mean - bp.head).normalized();
    }
    return (bp.tail - bp.head).normalized();
}

// Canonical rest frame: +Y carried onto the bone axis by the shortest arc,
// then rolled about it.
Mat3 rest_frame(const BBone& bone) {
    const Vec3 axis = bone.rest_axis();
    const Mat3 align = arc_rotation(Vec3::UnitY(), axis);
    return axis_rotation(axis, bone.rest_roll) * align;
}

}  // namespace

Rig::Rig(std::vector<BBone> bones) : bones_(std::move(bones)) {
    const int n = static_cast<int>(bones_.size());
    if (n == 0) throw Error("rig has no bones");

    std::set<std::string> names;
    for (const BBone& b : bones_) {
        if (!names.insert(b.name).second) throw Error("duplicate bone name '" + b.name + "'");
        if (b.rest_length() < 1e-9) throw Error("zero-length bone '" + b.name + "'");
        if (b.segments < 1) throw Error("bone '" + b.name + "' needs at least 1 segment");
        if (b.rest_radius <= 0.0) throw Error("bone '" + b.name + "' needs a positive radius");
        if (b.ease_in < 0.0 || b.ease_out < 0.0) throw Error("bone '" + b.name + "' has negative ease");
    }

    parent_.assign(n, -1);
    children_.assign(n, {});
    for (int i = 0; i < n; ++i) {
        if (!bones_[i].parent) continue;
        int p = -1;
        for (int j = 0; j < n; ++j) {
            if (bones_[j].name == *bones_[i].parent) { p = j; break; }
        }
        if (p < 0) throw Error("bone '" + bones_[i].name + "' references unknown parent '" + *bones_[i].parent + "'");
        parent_[i] = p;
        children_[p].push_back(i);
    }

    root_ = -1;
    for (int i = 0; i < n; ++i) {
        if (parent_[i] >= 0) continue;
        if (root_ >= 0) throw Error("rig is disconnected: multiple roots ('" + bones_[root_].name + "', '" + bones_[i].name + "')");
        root_ = i;
    }
    if (root_ < 0) throw Error("rig has a parent cycle and no root");

    for (int i = 0; i < n; ++i) {
        int steps = 0;
        for (int j = i; parent_[j] >= 0; j = parent_[j]) {
            if (++steps > n) throw Error("parent cycle through bone '" + bones_[i].name + "'");
        }
        if (parent_[i] >= 0) {
            const double gap = (bones_[i].rest_head - bones_[parent_[i]].rest_tail).norm();
            if (gap > 1e-6) {
                throw Error("bone '" + bones_[i].name + "' does not start at parent tail (gap " +
                            std::to_string(gap) + " mm)");
            }
        }
    }

    segment_base_.assign(n, 0);
    total_segments_ = 0;
    for (int i = 0; i < n; ++i) {
        segment_base_[i] = total_segments_;
        total_segments_ += bones_[i].segments;
    }
}

int Rig::bone_index(const std::string& name) const {
    for (size_t i = 0; i < bones_.size(); ++i) {
        if (bones_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::string Rig::joint_name(int joint) const {
    if (joint == 0) return bones_[root_].name + ".head";
    return bones_[joint - 1].name + ".tail";
}

int Rig::joint_by_name(const std::string& name) const {
    const size_t dot = name.rfind('.');
    if (dot == std::string::npos) return -1;
    const std::string bone = name.substr(0, dot);
    const std::string end = name.substr(dot + 1);
    const int b = bone_index(bone);
    if (b < 0) return -1;
    if (end == "tail") return tail_joint(b);
    if (end == "head") return head_joint(b);
    return -1;
}

bool Pose::finite() const {
    for (const BonePose& b : bones) {
        if (!b.head.allFinite() || !b.tail.allFinite()) return false;
        if (!std::isfinite(b.head_twist) || !std::isfinite(b.tail_twist) || !std::isfinite(b.stretch)) return false;
        if (!(b.stretch > 0.0)) return false;
    }
    return true;
}

Pose rest_pose(const Rig& rig) {
    Pose pose;
    pose.bones.resize(rig.bone_count());
    for (int i = 0; i < rig.bone_count(); ++i) {
        pose.bones[i].head = rig.bone(i).rest_head;
        pose.bones[i].tail = rig.bone(i).rest_tail;
    }
    return pose;
}

BoneHandles bone_handles(const Rig& rig, int bone, const Pose& pose) {
    const BBone& b = rig.bone(bone);
    const Vec3 axis = b.rest_axis();
    const double length = b.rest_length();

    BoneHandles h;
    const Vec3 head_rest = joint_direction_rest(rig, bone, BoneEnd::Head);
    const Vec3 head_posed = joint_direction_posed(rig, bone, BoneEnd::Head, pose);
    h.head_dir = rotate_arc(head_rest, head_posed, axis).normalized();
    h.head_tangent = h.head_dir * length * b.ease_in;

    const Vec3 tail_rest = joint_direction_rest(rig, bone, BoneEnd::Tail);
    const Vec3 tail_posed = joint_direction_posed(rig, bone, BoneEnd::Tail, pose);
    h.tail_dir = rotate_arc(tail_rest, tail_posed, axis).normalized();
    h.tail_tangent = h.tail_dir * length * b.ease_out;
    return h;
}

Vec3 end_tangent(const Rig& rig, int bone, BoneEnd end, const Pose& pose) {
    const BoneHandles h = bone_handles(rig, bone, pose);
    return end == BoneEnd::Head ? h.head_dir : h.tail_dir;
}

Vec3 rest_joint_direction(const Rig& rig, int bone, BoneEnd end) {
    return joint_direction_rest(rig, bone, end);
}

BoneCurve evaluate_bbone(const Rig& rig, int bone, const Pose& pose) {
    const BBone& b = rig.bone(bone);
    const BonePose& bp = pose.bones[bone];
    const double length = b.rest_length();
    if ((bp.tail - bp.head).norm() < 1e-9) throw Error("collapsed bone '" + b.name + "'");

    const BoneHandles handles = bone_handles(rig, bone, pose);
    const Vec3& m0 = handles.head_tangent;
    const Vec3& m1 = handles.tail_tangent;
    const int n = b.segments;

    // Frames transported over boundary and midpoint samples alike.
    const int samples = 2 * n + 1;
    std::vector<Vec3> points(samples);
    std::vector<Vec3> tangents(samples);
    Vec3 last_tangent = handles.head_dir;
    for (int j = 0; j < samples; ++j) {
        const double s = double(j) / double(2 * n);
        points[j] = hermite_point(bp.head, m0, bp.tail, m1, s);
        Vec3 d = hermite_derivative(bp.head, m0, bp.tail, m1, s);
        if (d.norm() < 1e-12 * length) d = last_tangent;  // vanishing handle (ease 0)
        tangents[j] = d.normalized();
        last_tangent = tangents[j];
    }

    Mat3 frame = arc_rotation(joint_direction_rest(rig, bone, BoneEnd::Head),
                              joint_direction_posed(rig, bone, BoneEnd::Head, pose)) *
                 rest_frame(b);

    BoneCurve curve;
    curve.segments.resize(n);
    curve.boundaries.resize(n + 1);
    curve.boundaries[0] = points[0];
    const double scale_cross = 1.0 / std::sqrt(bp.stretch);

    for (int j = 1; j < samples; ++j) {
        frame = arc_rotation(tangents[j - 1], tangents[j]) * frame;
        if (j % 2 == 0) {
            curve.boundaries[j / 2] = points[j];
            continue;
        }
        const int k = (j - 1) / 2;
        const double s = double(j) / double(2 * n);
        const double twist = bp.head_twist + (bp.tail_twist - bp.head_twist) * s;
        SegmentTransform& seg = curve.segments[k];
        seg.origin = points[j];
        seg.rotation = axis_rotation(frame.col(1), twist) * frame;
        seg.scale_axial = hermite_derivative(bp.head, m0, bp.tail, m1, s).norm() / length;
        seg.scale_cross = scale_cross;
    }
    return curve;
}

std::vector<SegmentTransform> evaluate_rig(const Rig& rig, const Pose& pose) {
    std::vector<SegmentTransform> segments(rig.total_segments());
    for (int b = 0; b < rig.bone_count(); ++b) {
        BoneCurve curve = evaluate_bbone(rig, b, pose);
        std::copy(curve.segments.begin(), curve.segments.end(), segments.begin() + rig.segment_base(b));
    }
    return segments;
}

std::vector<Strut> bind_struts(const Rig& rig, const EmaSweep& sweep, const CoilLayout& layout,
                               long bind_frame, const std::vector<StrutAssignment>& assignment,
                               double max_offset) {
    if (bind_frame < 0 || bind_frame >= sweep.frame_count()) throw Error("bind frame outside sweep");

    std::vector<Strut> struts;
    struts.reserve(assignment.size());
    for (const StrutAssignment& a : assignment) {
        const int coil = sweep.coil_index(a.coil_name);
        if (coil < 0) throw Error("unknown coil '" + a.coil_name + "' in strut assignment");
        if (!layout.role_of(a.coil_name)) throw Error("coil '" + a.coil_name + "' missing from layout");
        const int bone = rig.bone_index(a.bone_name);
        if (bone < 0) throw Error("unknown bone '" + a.bone_name + "' in strut assignment");

        const CoilSample& sample = sweep.at(bind_frame, coil);
        if (!sample.valid) throw Error("coil '" + a.coil_name + "' invalid at bind frame");

        const Vec3 endpoint = a.end == BoneEnd::Head ? rig.bone(bone).rest_head : rig.bone(bone).rest_tail;
        const Vec3 offset_world = endpoint - sample.position;
        Strut strut;
        strut.coil_name = a.coil_name;
        strut.bone_name = a.bone_name;
        strut.end = a.end;
        strut.offset = coil_frame(sample.direction).transpose() * offset_world;
        if (strut.offset.norm() > max_offset) {
            throw Error("strut offset for coil '" + a.coil_name + "' exceeds " + std::to_string(max_offset) + " mm");
        }
        struts.push_back(strut);
    }
    return struts;
}

std::vector<StrutTarget> strut_targets(const Rig& rig, const std::vector<Strut>& struts,
                                       const EmaSweep& sweep, long frame) {
    std::vector<StrutTarget> targets;
    targets.reserve(struts.size());
    for (const Strut& strut : struts) {
        const int coil = sweep.coil_index(strut.coil_name);
        if (coil < 0) throw Error("unknown coil '" + strut.coil_name + "' in sweep");
        const int bone = rig.bone_index(strut.bone_name);
        if (bone < 0) throw Error("unknown bone '" + strut.bone_name + "' in rig");

        const CoilSample& sample = sweep.at(frame, coil);
        StrutTarget t;
        t.bone = bone;
        t.end = strut.end;
        t.coil_name = strut.coil_name;
        if (sample.valid) {
            t.position = sample.position + coil_frame(sample.direction) * strut.offset;
            t.direction = sample.direction;
            t.weight = 1.0;
        } else {
            t.position = strut.end == BoneEnd::Head ? rig.bone(bone).rest_head : rig.bone(bone).rest_tail;
            t.direction = rig.bone(bone).rest_axis();
            t.weight = 0.0;
        }
        targets.push_back(t);
    }
    return targets;
}

}  // namespace emarig

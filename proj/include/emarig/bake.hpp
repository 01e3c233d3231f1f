#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "emarig/nla.hpp"
#include "emarig/skin.hpp"

namespace emarig {

struct BakedFrame {
    std::vector<Vec3> vertices;                 // deformed mesh positions
    std::vector<SegmentTransform> segments;     // flat, all bones
};

struct BakedSequence {
    double rate = 0.0;  // Hz after stride
    long source_frames = 0;
    long stride = 1;
    std::vector<BakedFrame> frames;
};

// Evaluates every stride-th frame of the action through B-bone evaluation
// and skinning. Deterministic.
BakedSequence bake(const Action& action, const Rig& rig, const Mesh& mesh,
                   const WeightMap& weights, long stride = 1);

// frame_000001.obj, frame_000002.obj, ... in the target directory.
std::vector<std::string> export_obj_sequence(const BakedSequence& baked, const Mesh& mesh,
                                             const std::string& directory);

// Animation interchange: rig rest data plus per-frame per-segment transforms
// (translation, unit quaternion, scales). Re-importing and re-skinning
// reproduces the baked meshes.
void export_animation(std::ostream& out, const BakedSequence& baked, const Rig& rig);

struct ImportedAnimation {
    Rig rig;
    double rate = 0.0;
    std::vector<std::vector<SegmentTransform>> frames;
};

ImportedAnimation import_animation(std::istream& in);

}  // namespace emarig

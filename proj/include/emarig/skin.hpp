#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "emarig/rig.hpp"

namespace emarig {

struct Mesh {
    std::vector<Vec3> vertices;                    // mm
    std::vector<std::array<int, 3>> triangles;     // vertex indices
    std::map<std::string, int> landmarks;          // name -> vertex index

    int vertex_count() const { return static_cast<int>(vertices.size()); }
};

// OBJ subset: v and f records, faces fan-triangulated, vt/vn ignored.
// Load-time cleanup welds vertices closer than 1e-6 mm and drops zero-area
// triangles.
Mesh load_mesh(std::istream& in);
void save_mesh(std::ostream& out, const Mesh& mesh);

struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

struct RegistrationResult {
    SimilarityTransform transform;
    double rms = 0.0;  // mm residual over correspondences
};

// Least-squares similarity (or rigid when allow_scale=false) alignment of
// source onto target. Throws on collinear/degenerate landmark sets.
RegistrationResult register_landmarks(const std::vector<Vec3>& source,
                                      const std::vector<Vec3>& target, bool allow_scale);

Mesh transform_mesh(const Mesh& mesh, const SimilarityTransform& transform);

struct WeightSettings {
    double power = 2.0;
    int max_influences = 4;
    double epsilon = 0.5;  // mm, keeps weights finite on the bone axis
};

struct VertexInfluence {
    int segment = -1;  // flat segment id, see Rig::segment_base
    double weight = 0.0;
};

struct WeightMap {
    std::vector<std::vector<VertexInfluence>> vertices;
};

// Inverse-distance weights against the rest-pose bone segments, top
// max_influences kept and normalized to sum 1.
WeightMap auto_weights(const Mesh& mesh, const Rig& rig, const WeightSettings& settings = {});

// Linear blend skinning through the rest-to-posed segment maps.
Mesh deform(const Mesh& mesh, const WeightMap& weights,
            const std::vector<SegmentTransform>& rest_segments,
            const std::vector<SegmentTransform>& posed_segments);

// Per-vertex summed influence of one bone, in [0, 1].
std::vector<double> weight_heatmap(const WeightMap& weights, const Rig& rig,
                                   const std::string& bone_name);

void write_heatmap_csv(std::ostream& out, const std::vector<double>& values);

}  // namespace emarig

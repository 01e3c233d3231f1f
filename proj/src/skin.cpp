#include "emarig/skin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <Eigen/SVD>

#include "emarig/error.hpp"

namespace emarig {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct GridKey {
    long long x, y, z;
    bool operator==(const GridKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct GridKeyHash {
    size_t operator()(const GridKey& k) const {
        size_t h = std::hash<long long>()(k.x);
        h = h * 1000003 ^ std::hash<long long>()(k.y);
        h = h * 1000003 ^ std::hash<long long>()(k.z);
        return h;
    }
};

// Weld vertices closer than tol via a quantized hash grid.
std::vector<int> weld_map(const std::vector<Vec3>& vertices, double tol) {
    std::unordered_map<GridKey, std::vector<int>, GridKeyHash> grid;
    std::vector<int> remap(vertices.size(), -1);
    std::vector<int> kept;
    const double inv = 1.0 / tol;
    for (size_t i = 0; i < vertices.size(); ++i) {
        const Vec3& p = vertices[i];
        const GridKey base{static_cast<long long>(std::floor(p.x() * inv)),
                           static_cast<long long>(std::floor(p.y() * inv)),
                           static_cast<long long>(std::floor(p.z() * inv))};
        int found = -1;
        for (long long dx = -1; dx <= 1 && found < 0; ++dx) {
            for (long long dy = -1; dy <= 1 && found < 0; ++dy) {
                for (long long dz = -1; dz <= 1 && found < 0; ++dz) {
                    const auto it = grid.find({base.x + dx, base.y + dy, base.z + dz});
                    if (it == grid.end()) continue;
                    for (int j : it->second) {
                        if ((vertices[j] - p).norm() < tol) { found = j; break; }
                    }
                }
            }
        }
        if (found >= 0) {
            remap[i] = remap[found];
        } else {
            remap[i] = static_cast<int>(kept.size());
            kept.push_back(static_cast<int>(i));
            grid[base].push_back(static_cast<int>(i));
        }
    }
    return remap;
}

}  // namespace

Mesh load_mesh(std::istream& in) {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::string line;
    long line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) throw ParseError("malformed vertex", line_no);
            vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> face;
            std::string token;
            while (ss >> token) {
                const size_t slash = token.find('/');
                const std::string index_str = slash == std::string::npos ? token : token.substr(0, slash);
                int idx = 0;
                try {
                    idx = std::stoi(index_str);
                } catch (const std::exception&) {
                    throw ParseError("malformed face index '" + token + "'", line_no);
                }
                if (idx < 1) throw ParseError("face index " + std::to_string(idx) + " out of range (OBJ is 1-based)",
                                              line_no);
                face.push_back(idx - 1);
            }
            if (face.size() < 3) throw ParseError("non-polygonal face with " + std::to_string(face.size()) +
                                                  " vertices", line_no);
            for (size_t k = 1; k + 1 < face.size(); ++k) {
                triangles.push_back({face[0], face[k], face[k + 1]});
            }
        }
        // vt/vn/usemtl and friends are ignored
    }

    for (const auto& t : triangles) {
        for (int idx : t) {
            if (idx >= static_cast<int>(vertices.size())) {
                throw ParseError("face index " + std::to_string(idx + 1) + " out of range");
            }
        }
    }
    if (vertices.size() < 3) throw ParseError("mesh needs at least 3 vertices");

    const std::vector<int> remap = weld_map(vertices, 1e-6);
    Mesh mesh;
    int kept = 0;
    for (int r : remap) kept = std::max(kept, r + 1);
    mesh.vertices.resize(kept);
    for (size_t i = 0; i < vertices.size(); ++i) mesh.vertices[remap[i]] = vertices[i];
    for (const auto& t : triangles) {
        const std::array<int, 3> mapped{remap[t[0]], remap[t[1]], remap[t[2]]};
        if (mapped[0] == mapped[1] || mapped[1] == mapped[2] || mapped[0] == mapped[2]) continue;
        const Vec3 a = mesh.vertices[mapped[0]];
        const double area2 = (mesh.vertices[mapped[1]] - a).cross(mesh.vertices[mapped[2]] - a).norm();
        if (area2 < 1e-12) continue;  // zero-area after weld
        mesh.triangles.push_back(mapped);
    }
    return mesh;
}

void save_mesh(std::ostream& out, const Mesh& mesh) {
    for (const Vec3& v : mesh.vertices) {
        out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << "\n";
    }
    for (const auto& t : mesh.triangles) {
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
    }
}

RegistrationResult register_landmarks(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                                      bool allow_scale) {
    if (source.size() != target.size()) throw Error("landmark count mismatch");
    const size_t n = source.size();
    if (n < 3) throw Error("degenerate landmark set: need at least 3 correspondences");

    Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        src_mean += source[i];
        dst_mean += target[i];
    }
    src_mean /= double(n);
    dst_mean /= double(n);

    Mat3 cov = Mat3::Zero();
    double src_var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 s = source[i] - src_mean;
        const Vec3 d = target[i] - dst_mean;
        cov += d * s.transpose();
        src_var += s.squaredNorm();
    }
    cov /= double(n);
    src_var /= double(n);

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(1) <= 1e-12 * (sv(0) + 1e-300)) throw Error("degenerate landmark set: collinear points");

    Mat3 s_fix = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s_fix(2, 2) = -1.0;

    RegistrationResult result;
    result.transform.rotation = svd.matrixU() * s_fix * svd.matrixV().transpose();
    result.transform.scale = allow_scale ? (sv(0) + sv(1) * s_fix(1, 1) + sv(2) * s_fix(2, 2)) / src_var : 1.0;
    if (allow_scale && !(result.transform.scale > 0.0)) throw Error("degenerate landmark set: non-positive scale");
    result.transform.translation = dst_mean - result.transform.scale * (result.transform.rotation * src_mean);

    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) ss += (result.transform.apply(source[i]) - target[i]).squaredNorm();
    result.rms = std::sqrt(ss / double(n));
    return result;
}

Mesh transform_mesh(const Mesh& mesh, const SimilarityTransform& transform) {
    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = transform.apply(v);
    return out;
}

WeightMap auto_weights(const Mesh& mesh, const Rig& rig, const WeightSettings& settings) {
    const Pose rest = rest_pose(rig);
    std::vector<Vec3> seg_a(rig.total_segments()), seg_b(rig.total_segments());
    for (int b = 0; b < rig.bone_count(); ++b) {
        const BoneCurve curve = evaluate_bbone(rig, b, rest);
        for (int k = 0; k < rig.bone(b).segments; ++k) {
            seg_a[rig.segment_base(b) + k] = curve.boundaries[k];
            seg_b[rig.segment_base(b) + k] = curve.boundaries[k + 1];
        }
    }

    WeightMap weights;
    weights.vertices.resize(mesh.vertices.size());
    std::vector<VertexInfluence> raw(rig.total_segments());
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
        for (int s = 0; s < rig.total_segments(); ++s) {
            const double d = point_segment_distance(mesh.vertices[v], seg_a[s], seg_b[s]);
            raw[s] = {s, 1.0 / std::pow(d + settings.epsilon, settings.power)};
        }
        const int keep = std::min<int>(settings.max_influences, rig.total_segments());
        std::partial_sort(raw.begin(), raw.begin() + keep, raw.end(),
                          [](const VertexInfluence& a, const VertexInfluence& b) {
                              return a.weight != b.weight ? a.weight > b.weight : a.segment < b.segment;
                          });
        double sum = 0.0;
        for (int k = 0; k < keep; ++k) sum += raw[k].weight;
        auto& out = weights.vertices[v];
        out.assign(raw.begin(), raw.begin() + keep);
        for (VertexInfluence& inf : out) inf.weight /= sum;
    }
    return weights;
}

Mesh deform(const Mesh& mesh, const WeightMap& weights,
            const std::vector<SegmentTransform>& rest_segments,
            const std::vector<SegmentTransform>& posed_segments) {
    if (rest_segments.size() != posed_segments.size()) throw Error("segment count mismatch");
    if (weights.vertices.size() != mesh.vertices.size()) throw Error("weight map does not match mesh");

    Mesh out = mesh;
    for (size_t v = 0; v < mesh.vertices.size(); ++v) {
        Vec3 blended = Vec3::Zero();
        for (const VertexInfluence& inf : weights.vertices[v]) {
            if (inf.segment < 0 || inf.segment >= static_cast<int>(rest_segments.size())) {
                throw Error("weight references missing segment " + std::to_string(inf.segment));
            }
            const SegmentTransform& r = rest_segments[inf.segment];
            const SegmentTransform& p = posed_segments[inf.segment];
            Vec3 local = r.rotation.transpose() * (mesh.vertices[v] - r.origin);
            local.x() *= p.scale_cross / r.scale_cross;
            local.y() *= p.scale_axial / r.scale_axial;
            local.z() *= p.scale_cross / r.scale_cross;
            blended += inf.weight * (p.origin + p.rotation * local);
        }
        out.vertices[v] = blended;
    }
    return out;
}

std::vector<double> weight_heatmap(const WeightMap& weights, const Rig& rig, const std::string& bone_name) {
    const int bone = rig.bone_index(bone_name);
    if (bone < 0) throw Error("unknown bone '" + bone_name + "'");
    const int base = rig.segment_base(bone);
    const int count = rig.bone(bone).segments;

    std::vector<double> values(weights.vertices.size(), 0.0);
    for (size_t v = 0; v < weights.vertices.size(); ++v) {
        for (const VertexInfluence& inf : weights.vertices[v]) {
            if (inf.segment >= base && inf.segment < base + count) values[v] += inf.weight;
        }
    }
    return values;
}

void write_heatmap_csv(std::ostream& out, const std::vector<double>& values) {
    out << "vertex_index,value\n";
    for (size_t i = 0; i < values.size(); ++i) {
        out << i << ',' << format_double(values[i]) << "\n";
    }
}

}  // namespace emarig

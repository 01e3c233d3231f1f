#include "emarig/bake.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "emarig/error.hpp"
#include "emarig/json_io.hpp"

namespace emarig {

BakedSequence bake(const Action& action, const Rig& rig, const Mesh& mesh, const WeightMap& weights,
                   long stride) {
    if (stride < 1) throw Error("bake stride must be >= 1");
    if (weights.vertices.size() != mesh.vertices.size()) throw Error("weight map does not match mesh");

    const std::vector<SegmentTransform> rest = evaluate_rig(rig, rest_pose(rig));

    BakedSequence baked;
    baked.rate = action.rate / double(stride);
    baked.source_frames = action.length();
    baked.stride = stride;
    for (long f = 0; f < action.length(); f += stride) {
        BakedFrame frame;
        frame.segments = evaluate_rig(rig, action.frames[f]);
        frame.vertices = deform(mesh, weights, rest, frame.segments).vertices;
        baked.frames.push_back(std::move(frame));
    }
    return baked;
}

std::vector<std::string> export_obj_sequence(const BakedSequence& baked, const Mesh& mesh,
                                             const std::string& directory) {
    std::filesystem::create_directories(directory);
    std::vector<std::string> paths;
    paths.reserve(baked.frames.size());
    for (size_t i = 0; i < baked.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.obj", i + 1);
        const std::string path = (std::filesystem::path(directory) / name).string();
        std::ofstream out(path);
        if (!out) throw Error("cannot open '" + path + "' for writing");
        Mesh frame_mesh = mesh;
        frame_mesh.vertices = baked.frames[i].vertices;
        save_mesh(out, frame_mesh);
        if (!out.good()) throw Error("write failed for '" + path + "'");
        paths.push_back(path);
    }
    return paths;
}

namespace {

nlohmann::json segment_to_json(const SegmentTransform& seg) {
    Quat q(seg.rotation);
    q.normalize();
    if (q.w() < 0.0 || (q.w() == 0.0 && (q.x() < 0.0 || (q.x() == 0.0 && (q.y() < 0.0 || (q.y() == 0.0 && q.z() < 0.0)))))) {
        q.coeffs() = -q.coeffs();
    }
    return {{"t", {seg.origin.x(), seg.origin.y(), seg.origin.z()}},
            {"q", {q.w(), q.x(), q.y(), q.z()}},
            {"s", {seg.scale_axial, seg.scale_cross}}};
}

SegmentTransform segment_from_json(const nlohmann::json& doc) {
    SegmentTransform seg;
    const auto& t = doc.at("t");
    seg.origin = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    const auto& q = doc.at("q");
    Quat quat(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
    quat.normalize();
    seg.rotation = quat.toRotationMatrix();
    seg.scale_axial = doc.at("s").at(0).get<double>();
    seg.scale_cross = doc.at("s").at(1).get<double>();
    return seg;
}

}  // namespace

void export_animation(std::ostream& out, const BakedSequence& baked, const Rig& rig) {
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["rate"] = baked.rate;
    doc["stride"] = baked.stride;
    doc["source_frames"] = baked.source_frames;
    doc["rig"] = rig_to_json(rig);
    nlohmann::json frames = nlohmann::json::array();
    for (const BakedFrame& frame : baked.frames) {
        nlohmann::json segments = nlohmann::json::array();
        for (const SegmentTransform& seg : frame.segments) segments.push_back(segment_to_json(seg));
        frames.push_back({{"segments", std::move(segments)}});
    }
    doc["frames"] = std::move(frames);
    out << doc.dump(1, '\t') << "\n";
    if (!out.good()) throw Error("animation export failed");
}

ImportedAnimation import_animation(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid animation JSON: ") + e.what());
    }
    if (doc.at("format_version").get<int>() != kFormatVersion) {
        throw ParseError("unsupported animation format_version");
    }
    ImportedAnimation anim;
    anim.rig = parse_rig(doc.at("rig"));
    anim.rate = doc.at("rate").get<double>();
    for (const auto& frame : doc.at("frames")) {
        std::vector<SegmentTransform> segments;
        for (const auto& seg : frame.at("segments")) segments.push_back(segment_from_json(seg));
        if (static_cast<int>(segments.size()) != anim.rig.total_segments()) {
            throw ParseError("animation frame segment count does not match rig");
        }
        anim.frames.push_back(std::move(segments));
    }
    return anim;
}

}  // namespace emarig

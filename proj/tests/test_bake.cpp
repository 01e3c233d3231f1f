#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emarig/bake.hpp"
#include "emarig/error.hpp"
#include "emarig/synth.hpp"
#include "support/test_util.hpp"

using namespace emarig;
namespace etest = emarig::test;

namespace {

// Small vertex cloud hugging the default rig.
Mesh rig_cloud(const Rig& rig, int per_bone = 6) {
    Mesh mesh;
    for (int b = 0; b < rig.bone_count(); ++b) {
        const BBone& bone = rig.bone(b);
        for (int i = 0; i < per_bone; ++i) {
            const double s = double(i + 1) / double(per_bone + 1);
            const Vec3 axis_point = bone.rest_head + s * (bone.rest_tail - bone.rest_head);
            mesh.vertices.push_back(axis_point + Vec3(0.4 * i - 1.0, 0.3, bone.rest_radius * 0.5));
        }
    }
    for (int i = 0; i + 2 < mesh.vertex_count(); ++i) mesh.triangles.push_back({i, i + 1, i + 2});
    return mesh;
}

Pose tip_raised(const Rig& rig, double dz) {
    std::vector<Vec3> joints = etest::rest_joints(rig);
    joints[rig.tail_joint(rig.bone_index("spine4"))] += Vec3(0, -1, dz);
    joints[rig.tail_joint(rig.bone_index("spine3"))] += Vec3(0, 0, dz * 0.4);
    return etest::pose_from_joints(rig, joints);
}

}  // namespace

TEST_CASE("a 1-frame rest bake reproduces the bind mesh") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);

    Action action;
    action.name = "rest";
    action.rate = 200.0;
    action.frames = {rest_pose(rig)};
    const BakedSequence baked = bake(action, rig, mesh, weights, 1);
    REQUIRE(baked.frames.size() == 1);
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        CHECK((baked.frames[0].vertices[i] - mesh.vertices[i]).norm() < 1e-9);
    }
}

TEST_CASE("bake stride decimates 200 Hz to 25 Hz") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);

    Action action;
    action.name = "hold";
    action.rate = 200.0;
    action.frames.assign(100, rest_pose(rig));
    const BakedSequence baked = bake(action, rig, mesh, weights, 8);
    CHECK(baked.frames.size() == 13);  // ceil(100 / 8)
    CHECK(baked.rate == doctest::Approx(25.0));
    CHECK_THROWS_AS(bake(action, rig, mesh, weights, 0), Error);
}

TEST_CASE("baked frames equal direct deform calls and move the tip, not the root") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);

    Action action;
    action.name = "cycle";
    action.rate = 200.0;
    action.frames = {rest_pose(rig), tip_raised(rig, 8.0)};
    const BakedSequence baked = bake(action, rig, mesh, weights, 1);
    REQUIRE(baked.frames.size() == 2);

    const auto rest_segments = evaluate_rig(rig, rest_pose(rig));
    for (long f = 0; f < 2; ++f) {
        const Mesh direct = deform(mesh, weights, rest_segments, evaluate_rig(rig, action.frames[f]));
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            CHECK((baked.frames[f].vertices[i] - direct.vertices[i]).norm() < 1e-12);
        }
    }

    // displacement field: strong near the tip bone, vanishing at the pinned root
    const std::vector<double> tip_influence = weight_heatmap(weights, rig, "spine4");
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const double moved = (baked.frames[1].vertices[i] - baked.frames[0].vertices[i]).norm();
        if (tip_influence[i] > 0.9) CHECK(moved > 1.0);
        if (i < 2) CHECK(moved < 0.5);  // first vertices sit at the root end
    }
}

TEST_CASE("obj sequence export writes 1-based zero-padded frames") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);
    Action action;
    action.name = "hold";
    action.rate = 200.0;
    action.frames.assign(3, rest_pose(rig));
    const BakedSequence baked = bake(action, rig, mesh, weights, 1);

    etest::TempDir dir("objseq");
    const auto paths = export_obj_sequence(baked, mesh, dir.file("frames"));
    REQUIRE(paths.size() == 3);
    CHECK(std::filesystem::path(paths[0]).filename() == "frame_000001.obj");
    CHECK(std::filesystem::path(paths[2]).filename() == "frame_000003.obj");
    for (const std::string& p : paths) CHECK(std::filesystem::exists(p));

    std::ifstream in(paths[0]);
    const Mesh reread = load_mesh(in);
    CHECK(reread.vertex_count() == mesh.vertex_count());
}

TEST_CASE("animation export/import round trip reproduces baked meshes within 1e-6 mm") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);

    std::mt19937_64 rng(97);
    Action action;
    action.name = "wiggle";
    action.rate = 200.0;
    for (int f = 0; f < 5; ++f) action.frames.push_back(etest::random_pose(rig, rng, 4.0, 0.2));
    const BakedSequence baked = bake(action, rig, mesh, weights, 1);

    std::ostringstream out;
    export_animation(out, baked, rig);
    std::istringstream in(out.str());
    const ImportedAnimation anim = import_animation(in);
    REQUIRE(anim.frames.size() == baked.frames.size());
    CHECK(anim.rate == doctest::Approx(baked.rate));

    const auto rest_segments = evaluate_rig(anim.rig, rest_pose(anim.rig));
    for (size_t f = 0; f < anim.frames.size(); ++f) {
        const Mesh redone = deform(mesh, weights, rest_segments, anim.frames[f]);
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            CHECK((redone.vertices[i] - baked.frames[f].vertices[i]).norm() < 1e-6);
        }
    }
}

TEST_CASE("baked trajectories from a cleaned solve are continuous") {
    const Rig rig = etest::load_default_rig();
    const CoilLayout layout = parse_layout(load_json_file(etest::data_path("synth_layout.json")));
    const auto struts = parse_struts(load_json_file(etest::data_path("synth_struts.json")));
    const auto ref_pose = parse_point_map(load_json_file(etest::data_path("reference_pose.json")));
    const auto cycle = parse_gesture_script(load_json_file(etest::data_path("gesture_ta.json")), rig);
    std::vector<GestureStep> script;
    for (int c = 0; c < 2; ++c) script.insert(script.end(), cycle.begin(), cycle.end());

    const SynthResult data = generate_gesture(rig, struts, layout, ref_pose, script, 200.0, {}, 21);
    const CleanResult cleaned = clean(data.sweep, {});
    const SweepSolve solve = solve_sweep(rig, struts, cleaned.sweep, IkSettings{});

    Action action;
    action.name = "corpus";
    action.rate = 200.0;
    for (const FrameSolve& fs : solve.frames) action.frames.push_back(fs.pose);

    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);
    const long stride = 8;
    const BakedSequence baked = bake(action, rig, mesh, weights, stride);

    const double bound = 500.0 * double(stride) / 200.0;  // max_speed * stride / rate
    for (size_t f = 1; f < baked.frames.size(); ++f) {
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            CHECK((baked.frames[f].vertices[v] - baked.frames[f - 1].vertices[v]).norm() < bound);
        }
    }
}

TEST_CASE("exported quaternions are unit length") {
    const Rig rig = etest::load_default_rig();
    const Mesh mesh = rig_cloud(rig);
    const WeightMap weights = auto_weights(mesh, rig);
    std::mt19937_64 rng(99);
    Action action;
    action.name = "wiggle";
    action.rate = 200.0;
    for (int f = 0; f < 3; ++f) action.frames.push_back(etest::random_pose(rig, rng, 5.0, 0.3));
    const BakedSequence baked = bake(action, rig, mesh, weights, 1);

    std::ostringstream out;
    export_animation(out, baked, rig);
    const nlohmann::json doc = nlohmann::json::parse(out.str());
    for (const auto& frame : doc.at("frames")) {
        for (const auto& seg : frame.at("segments")) {
            const auto& q = seg.at("q");
            const double norm = std::sqrt(q.at(0).get<double>() * q.at(0).get<double>() +
                                          q.at(1).get<double>() * q.at(1).get<double>() +
                                          q.at(2).get<double>() * q.at(2).get<double>() +
                                          q.at(3).get<double>() * q.at(3).get<double>());
            CHECK(std::abs(norm - 1.0) < 1e-9);
        }
    }
}

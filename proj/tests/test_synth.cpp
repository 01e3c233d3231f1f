#include <doctest.h>

#include <sstream>

#include "emarig/error.hpp"
#include "emarig/ik.hpp"
#include "emarig/json_io.hpp"
#include "emarig/synth.hpp"
#include "support/test_util.hpp"

using namespace emarig;
namespace etest = emarig::test;

namespace {

struct SynthScene {
    Rig rig;
    CoilLayout layout;
    std::vector<Strut> struts;
    std::map<std::string, Vec3> ref_pose;

    SynthScene()
        : rig(etest::load_default_rig()),
          layout(parse_layout(load_json_file(etest::data_path("synth_layout.json")))),
          struts(parse_struts(load_json_file(etest::data_path("synth_struts.json")))),
          ref_pose(parse_point_map(load_json_file(etest::data_path("reference_pose.json")))) {}
};

GestureStep hold_step(const Pose& pose, long hold, long transition) {
    GestureStep step;
    step.target = pose;
    step.hold_frames = hold;
    step.transition_frames = transition;
    return step;
}

Pose offset_pose(const Rig& rig, const Vec3& tip_delta) {
    std::vector<Vec3> joints = etest::rest_joints(rig);
    for (size_t j = 1; j < joints.size(); ++j) joints[j] += tip_delta * (double(j) / double(joints.size()));
    return etest::pose_from_joints(rig, joints);
}

}  // namespace

TEST_CASE("a noise-free rest hold reproduces rest endpoints through the struts") {
    SynthScene scene;
    const SynthResult result = generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                                {hold_step(rest_pose(scene.rig), 10, 0)}, 200.0, {}, 1);
    CHECK(result.sweep.frame_count() == 10);
    for (long f = 0; f < 10; ++f) {
        const auto targets = strut_targets(scene.rig, scene.struts, result.sweep, f);
        for (const StrutTarget& t : targets) {
            const Vec3 endpoint = t.end == BoneEnd::Head ? scene.rig.bone(t.bone).rest_head
                                                         : scene.rig.bone(t.bone).rest_tail;
            CHECK(t.weight == 1.0);
            CHECK((t.position - endpoint).norm() < 1e-12);
        }
    }
}

TEST_CASE("a repeated two-pose cycle is periodic after the first cycle") {
    SynthScene scene;
    const Pose a = offset_pose(scene.rig, Vec3(0, 2, 5));
    const Pose b = offset_pose(scene.rig, Vec3(0, -2, -4));
    std::vector<GestureStep> script;
    for (int c = 0; c < 10; ++c) {
        script.push_back(hold_step(a, 4, 6));
        script.push_back(hold_step(b, 4, 6));
    }
    const SynthResult result =
        generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, script, 200.0, {}, 1);
    const long period = 20;
    REQUIRE(result.sweep.frame_count() == 10 * period);
    for (long f = period; f + period < result.sweep.frame_count(); ++f) {
        for (int c = 0; c < result.sweep.coil_count(); ++c) {
            CHECK((result.sweep.at(f, c).position - result.sweep.at(f + period, c).position).norm() == 0.0);
        }
    }
}

TEST_CASE("outlier injection count follows the configured rate and is fully recorded") {
    SynthScene scene;
    // 11 coils (8 struts + 3 references); ~910 frames gives ~10000 samples
    NoiseSettings noise;
    noise.outlier_rate = 0.01;
    const long hold = 910;
    const SynthResult result = generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                                {hold_step(rest_pose(scene.rig), hold, 0)}, 200.0, noise, 42);
    const long samples = result.sweep.frame_count() * result.sweep.coil_count();
    CHECK(samples >= 10000);
    const double expected = 0.01 * double(samples);
    const double spread = 3.0 * std::sqrt(expected);
    CHECK(double(result.truth.outliers.size()) > expected - spread);
    CHECK(double(result.truth.outliers.size()) < expected + spread);

    // every record points at a sample that really moved
    const SynthResult clean_run = generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                                   {hold_step(rest_pose(scene.rig), hold, 0)}, 200.0, {}, 42);
    for (const InjectionRecord& r : result.truth.outliers) {
        const int c = result.sweep.coil_index(r.coil);
        const double moved =
            (result.sweep.at(r.frame, c).position - clean_run.sweep.at(r.frame, c).position).norm();
        CHECK(moved >= noise.outlier_min * 0.99);
    }
}

TEST_CASE("generation is deterministic for a fixed seed") {
    SynthScene scene;
    NoiseSettings noise;
    noise.sigma_pos = 0.5;
    noise.outlier_rate = 0.02;
    noise.dropout_rate = 0.01;
    const auto script = std::vector<GestureStep>{hold_step(offset_pose(scene.rig, Vec3(1, 2, 3)), 20, 10)};
    const SynthResult a =
        generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, script, 200.0, noise, 7);
    const SynthResult b =
        generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, script, 200.0, noise, 7);
    std::ostringstream sa, sb;
    write_sweep(sa, a.sweep);
    write_sweep(sb, b.sweep);
    CHECK(sa.str() == sb.str());
    CHECK(a.truth.outliers.size() == b.truth.outliers.size());
    CHECK(a.truth.dropouts.size() == b.truth.dropouts.size());
}

TEST_CASE("solving a noise-free gesture recovers the scripted endpoint tracks") {
    SynthScene scene;
    const std::vector<GestureStep> script{hold_step(offset_pose(scene.rig, Vec3(0, 3, 6)), 8, 12),
                                          hold_step(offset_pose(scene.rig, Vec3(0, -2, -5)), 8, 12)};
    const SynthResult result =
        generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, script, 200.0, {}, 1);

    IkSettings settings;
    settings.temporal_weight = 0.0;  // per-frame independent closure mode
    settings.rest_weight = 1e-4;
    const SweepSolve solve = solve_sweep(scene.rig, scene.struts, result.sweep, settings);
    REQUIRE(solve.frames.size() == result.truth.poses.size());
    for (size_t f = 0; f < solve.frames.size(); ++f) {
        for (int b = 0; b < scene.rig.bone_count(); ++b) {
            CHECK((solve.frames[f].pose.bones[b].tail - result.truth.poses[f].bones[b].tail).norm() < 1e-3);
        }
    }
}

TEST_CASE("mean IK residual is non-decreasing in position noise") {
    SynthScene scene;
    const std::vector<GestureStep> script{hold_step(offset_pose(scene.rig, Vec3(0, 2, 4)), 10, 10)};
    double previous = -1.0;
    for (const double sigma : {0.0, 0.1, 0.5}) {
        NoiseSettings noise;
        noise.sigma_pos = sigma;
        const SynthResult result =
            generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, script, 200.0, noise, 11);
        const SweepSolve solve = solve_sweep(scene.rig, scene.struts, result.sweep, IkSettings{});
        CHECK(solve.report.mean_residual >= previous);
        previous = solve.report.mean_residual;
    }
}

TEST_CASE("head motion is removed exactly by head correction") {
    SynthScene scene;
    HeadMotionSettings head;
    head.rotation_amplitude = 0.05;
    head.translation_amplitude = 5.0;
    const SynthResult moving = generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                                {hold_step(rest_pose(scene.rig), 40, 0)}, 200.0, {}, 1, head);
    const SynthResult still = generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                               {hold_step(rest_pose(scene.rig), 40, 0)}, 200.0, {}, 1);

    const HeadCorrectResult corrected = head_correct(moving.sweep, scene.layout, scene.ref_pose);
    for (long f = 0; f < 40; ++f) {
        for (int c = 0; c < corrected.sweep.coil_count(); ++c) {
            CHECK((corrected.sweep.at(f, c).position - still.sweep.at(f, c).position).norm() < 1e-9);
        }
    }
}

TEST_CASE("empty scripts are rejected") {
    SynthScene scene;
    CHECK_THROWS_AS(
        generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose, {}, 200.0, {}, 1),
        Error);
    CHECK_THROWS_AS(generate_gesture(scene.rig, scene.struts, scene.layout, scene.ref_pose,
                                     {hold_step(rest_pose(scene.rig), 10, 0)}, 0.0, {}, 1),
                    Error);
}

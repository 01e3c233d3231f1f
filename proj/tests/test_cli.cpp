// End-to-end checks of the command line driver through a real subprocess.

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "emarig/json_io.hpp"
#include "support/test_util.hpp"

using namespace emarig;
namespace etest = emarig::test;
using etest::CliResult;
using etest::TempDir;
using nlohmann::json;

namespace {

std::string q(const std::string& s) { return "'" + s + "'"; }

// synth -> ingest -> solve with the shipped synthetic configuration.
struct Pipeline {
    TempDir dir{"cli"};
    std::string sweep = dir.file("sweep.csv");
    std::string truth = dir.file("truth.json");
    std::string clean = dir.file("clean.csv");
    std::string poses = dir.file("poses.json");

    CliResult synth(const std::string& extra = {}) {
        return etest::run_cli("synth --rig " + q(etest::data_path("rig_default.json")) +
                                  " --layout " + q(etest::data_path("synth_layout.json")) +
                                  " --struts " + q(etest::data_path("synth_struts.json")) +
                                  " --gesture " + q(etest::data_path("gesture_ta.json")) +
                                  " --ref-pose " + q(etest::data_path("reference_pose.json")) +
                                  " --cycles 2 --rate 200 --seed 5 --out " + q(sweep) + " --truth " +
                                  q(truth) + " " + extra,
                              dir);
    }
    CliResult ingest(const std::string& extra = {}) {
        return etest::run_cli("ingest --in " + q(sweep) + " --layout " +
                                  q(etest::data_path("synth_layout.json")) + " --ref-pose " +
                                  q(etest::data_path("reference_pose.json")) + " --out " + q(clean) + " " +
                                  extra,
                              dir);
    }
    CliResult solve(const std::string& extra = {}) {
        return etest::run_cli("solve --rig " + q(etest::data_path("rig_default.json")) + " --struts " +
                                  q(etest::data_path("synth_struts.json")) + " --in " + q(clean) +
                                  " --out " + q(poses) + " " + extra,
                              dir);
    }
};

}  // namespace

TEST_CASE("cli reports a version") {
    TempDir dir("version");
    const CliResult r = etest::run_cli("--version", dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags with a usage error") {
    TempDir dir("badflag");
    const CliResult r = etest::run_cli("solve --nope", dir);
    CHECK(r.exit_code == 2);
    const json err = json::parse(r.err);
    CHECK(err.at("error").at("type") == "usage");
}

TEST_CASE("ingest on a malformed csv exits with 2 and names the line") {
    TempDir dir("badcsv");
    const std::string bad = dir.file("bad.csv");
    std::ofstream(bad) << "#rate=200\nframe,c_x,c_y,c_z,c_dx,c_dy,c_dz\n0,1,2\n";
    const CliResult r = etest::run_cli("ingest --in '" + bad + "' --no-head-correct --no-clean --out '" +
                                           dir.file("out.csv") + "'",
                                       dir);
    CHECK(r.exit_code == 2);
    const json err = json::parse(r.err);
    CHECK(err.at("error").at("type") == "parse");
    CHECK(err.at("error").at("line") == 3);
}

TEST_CASE("missing input files exit with 2 and a path in the message") {
    TempDir dir("missing");
    const CliResult r = etest::run_cli("solve --rig nope.json --struts nope.json --in nope.csv --out x.json",
                                       dir);
    CHECK(r.exit_code == 2);
    const json err = json::parse(r.err);
    const std::string message = err.at("error").at("message");
    CHECK(message.find("nope") != std::string::npos);
}

TEST_CASE("dry-run validates without writing") {
    Pipeline p;
    const CliResult r = p.synth("--dry-run");
    CHECK(r.exit_code == 0);
    CHECK_FALSE(std::filesystem::exists(p.sweep));
}

TEST_CASE("synth, ingest, solve and report run end to end") {
    Pipeline p;
    CHECK(p.synth().exit_code == 0);
    CHECK(p.ingest().exit_code == 0);
    CHECK(p.solve().exit_code == 0);

    const json doc = load_json_file(p.poses);
    const PoseTrack track = parse_pose_track(doc);
    CHECK(track.poses.size() == 160);  // 2 cycles of the shipped gesture
    CHECK(doc.at("report").at("non_converged_frames").empty());

    const CliResult report = etest::run_cli("report --in '" + p.poses + "'", p.dir);
    CHECK(report.exit_code == 0);
    CHECK(report.out.find("frames:") != std::string::npos);
    CHECK(report.out.find("mode:") != std::string::npos);
}

TEST_CASE("pipeline outputs are byte-identical across runs") {
    Pipeline a, b;
    REQUIRE(a.synth().exit_code == 0);
    REQUIRE(a.ingest().exit_code == 0);
    REQUIRE(a.solve().exit_code == 0);
    REQUIRE(b.synth().exit_code == 0);
    REQUIRE(b.ingest().exit_code == 0);
    REQUIRE(b.solve().exit_code == 0);
    CHECK(etest::slurp(a.sweep) == etest::slurp(b.sweep));
    CHECK(etest::slurp(a.clean) == etest::slurp(b.clean));
    CHECK(etest::slurp(a.poses) == etest::slurp(b.poses));
}

TEST_CASE("parallel solve partitions at annotation boundaries and says so") {
    Pipeline p;
    REQUIRE(p.synth().exit_code == 0);
    REQUIRE(p.ingest().exit_code == 0);
    const std::string ann = p.dir.file("ann.json");
    std::ofstream(ann) << json::array({{{"label", "a"}, {"start_frame", 0}, {"end_frame", 80}},
                                       {{"label", "b"}, {"start_frame", 80}, {"end_frame", 160}}})
                              .dump();
    const CliResult r = p.solve("--parallel --annotations '" + ann + "'");
    REQUIRE(r.exit_code == 0);
    const json doc = load_json_file(p.poses);
    CHECK(doc.at("report").at("mode") == "partitioned");
    CHECK(doc.at("frames").size() == 160);
}

TEST_CASE("ingest validates a palate trace and reports its size") {
    Pipeline p;
    REQUIRE(p.synth().exit_code == 0);
    const std::string palate = p.dir.file("palate.txt");
    std::ofstream(palate) << "0 40 30\n10 45 28\n-10 45 28\n0 55 26\n";
    const std::string report = p.dir.file("ingest_report.json");
    const CliResult r = p.ingest("--palate '" + palate + "' --report '" + report + "'");
    REQUIRE(r.exit_code == 0);
    CHECK(load_json_file(report).at("palate_points") == 4);

    std::ofstream(palate) << "0 0 0\n1 1 1\n";  // too few points
    CHECK(p.ingest("--palate '" + palate + "'").exit_code == 2);
}

TEST_CASE("configuration precedence is flag over config over default") {
    Pipeline p;
    REQUIRE(p.synth().exit_code == 0);
    REQUIRE(p.ingest().exit_code == 0);

    const std::string config = p.dir.file("project.json");
    std::ofstream(config) << json{{"rig", etest::data_path("rig_default.json")},
                                  {"struts", etest::data_path("synth_struts.json")},
                                  {"max_iterations", 1}}
                                 .dump();

    auto max_iterations_of = [&]() {
        const json doc = load_json_file(p.poses);
        long max_iterations = 0;
        for (const auto& frame : doc.at("frames")) {
            max_iterations = std::max(max_iterations, frame.at("iterations").get<long>());
        }
        return max_iterations;
    };

    // config only: the iteration cap bites
    CliResult r = etest::run_cli("--config '" + config + "' solve --in '" + p.clean + "' --out '" +
                                     p.poses + "'",
                                 p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(max_iterations_of() == 1);

    // flag wins over config
    r = etest::run_cli("--config '" + config + "' solve --max-iterations 50 --in '" + p.clean +
                           "' --out '" + p.poses + "'",
                       p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(max_iterations_of() > 1);
}

TEST_CASE("actions, timeline, bake and export compose on disk") {
    Pipeline p;
    REQUIRE(p.synth().exit_code == 0);
    REQUIRE(p.ingest().exit_code == 0);
    REQUIRE(p.solve().exit_code == 0);

    const std::string ann = p.dir.file("annotations.json");
    std::ofstream(ann) << json::array({{{"label", "cycle_a"}, {"start_frame", 0}, {"end_frame", 80}},
                                       {{"label", "cycle_b"}, {"start_frame", 80}, {"end_frame", 160}}})
                              .dump();
    const std::string actions_dir = p.dir.file("actions");
    CliResult r = etest::run_cli("actions --in '" + p.poses + "' --annotations '" + ann +
                                     "' --out-dir '" + actions_dir + "'",
                                 p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(actions_dir + "/cycle_a.action.json"));

    const std::string timeline = p.dir.file("timeline.json");
    std::ofstream(timeline) << json{{"format_version", 1},
                                    {"entries", json::array({{{"action", "cycle_a"}, {"crossfade_frames", 10}},
                                                             {{"action", "cycle_b"}, {"crossfade_frames", 0}}})}}
                                   .dump();
    const std::string resolved = p.dir.file("resolved.action.json");
    r = etest::run_cli("timeline --timeline '" + timeline + "' --actions-dir '" + actions_dir +
                           "' --out '" + resolved + "'",
                       p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(parse_action(load_json_file(resolved)).length() == 150);  // 80 + 80 - 10

    // small procedural mesh and weights via bind
    const Rig rig = etest::load_default_rig();
    Mesh mesh;
    for (int b = 0; b < rig.bone_count(); ++b) {
        for (int i = 0; i < 4; ++i) {
            const double s = (i + 1) / 5.0;
            mesh.vertices.push_back(rig.bone(b).rest_head +
                                    s * (rig.bone(b).rest_tail - rig.bone(b).rest_head) + Vec3(0.5, 0, 1));
        }
    }
    for (int i = 0; i + 2 < mesh.vertex_count(); ++i) mesh.triangles.push_back({i, i + 1, i + 2});
    const std::string mesh_path = p.dir.file("mesh.obj");
    {
        std::ofstream out(mesh_path);
        save_mesh(out, mesh);
    }
    const std::string weights_path = p.dir.file("weights.json");
    r = etest::run_cli("bind --rig '" + etest::data_path("rig_default.json") + "' --layout '" +
                           etest::data_path("synth_layout.json") + "' --in '" + p.clean +
                           "' --bind-frame 0 --assignment '" + etest::data_path("synth_struts.json") +
                           "' --mesh '" + mesh_path + "' --out-struts '" + p.dir.file("bound.json") +
                           "' --out-weights '" + weights_path + "' --heatmap spine4 --heatmap-out '" +
                           p.dir.file("heat.csv") + "'",
                       p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(weights_path));
    CHECK(etest::slurp(p.dir.file("heat.csv")).rfind("vertex_index,value\n", 0) == 0);

    const std::string anim = p.dir.file("anim.json");
    r = etest::run_cli("bake --action '" + resolved + "' --rig '" + etest::data_path("rig_default.json") +
                           "' --mesh '" + mesh_path + "' --weights '" + weights_path +
                           "' --stride 8 --out '" + anim + "'",
                       p.dir);
    REQUIRE(r.exit_code == 0);
    const json anim_doc = load_json_file(anim);
    CHECK(anim_doc.at("rate").get<double>() == doctest::Approx(25.0));  // 200 Hz / 8
    CHECK(anim_doc.at("frames").size() == 19);                          // ceil(150 / 8)

    const std::string obj_dir = p.dir.file("objs");
    r = etest::run_cli("export --anim '" + anim + "' --mesh '" + mesh_path + "' --weights '" +
                           weights_path + "' --out-dir '" + obj_dir + "'",
                       p.dir);
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(obj_dir + "/frame_000001.obj"));
    CHECK(std::filesystem::exists(obj_dir + "/frame_000019.obj"));
}

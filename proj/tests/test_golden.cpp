// Byte-layout pins for the on-disk formats. Regenerate with
// EMARIG_UPDATE_GOLDEN=1 after an intentional format change.

#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "emarig/bake.hpp"
#include "emarig/json_io.hpp"
#include "support/format_fixtures.hpp"
#include "support/test_util.hpp"

using namespace emarig;
namespace etest = emarig::test;
using etest::fixture_action;
using etest::fixture_mesh;
using etest::fixture_sweep;

TEST_CASE("sweep csv byte layout is pinned") {
    std::ostringstream out;
    write_sweep(out, fixture_sweep());
    std::string message;
    CHECK_MESSAGE(etest::matches_golden("sweep.csv", out.str(), message), message);
}

TEST_CASE("mesh obj byte layout is pinned") {
    std::ostringstream out;
    save_mesh(out, fixture_mesh());
    std::string message;
    CHECK_MESSAGE(etest::matches_golden("mesh.obj", out.str(), message), message);
}

TEST_CASE("action json byte layout is pinned") {
    const std::string text = action_to_json(fixture_action()).dump(1, '\t') + "\n";
    std::string message;
    CHECK_MESSAGE(etest::matches_golden("action.json", text, message), message);

    // and the round trip closes exactly
    const Action again = parse_action(nlohmann::json::parse(text));
    REQUIRE(again.length() == 2);
    CHECK(again.name == "fixture");
    CHECK(again.source.start_frame == 10);
    for (long f = 0; f < 2; ++f) {
        CHECK((again.frames[f].bones[0].tail - fixture_action().frames[f].bones[0].tail).norm() == 0.0);
    }
}

TEST_CASE("animation json byte layout is pinned") {
    const etest::FixtureBake fb = etest::fixture_bake();
    std::ostringstream out;
    export_animation(out, fb.baked, fb.rig);
    std::string message;
    CHECK_MESSAGE(etest::matches_golden("anim.json", out.str(), message), message);
}

TEST_CASE("rig and layout json round trip through their parsers") {
    const Rig rig = etest::load_default_rig();
    const Rig again = parse_rig(rig_to_json(rig));
    REQUIRE(again.bone_count() == rig.bone_count());
    for (int b = 0; b < rig.bone_count(); ++b) {
        CHECK(again.bone(b).name == rig.bone(b).name);
        CHECK((again.bone(b).rest_head - rig.bone(b).rest_head).norm() == 0.0);
        CHECK((again.bone(b).rest_tail - rig.bone(b).rest_tail).norm() == 0.0);
        CHECK(again.bone(b).segments == rig.bone(b).segments);
    }

    const CoilLayout layout = parse_layout(load_json_file(etest::data_path("layout_default.json")));
    const CoilLayout layout2 = parse_layout(layout_to_json(layout));
    CHECK(layout2.entries.size() == layout.entries.size());
    CHECK(layout2.reference_names() == layout.reference_names());
}

TEST_CASE("settings and struts json round trip") {
    IkSettings s;
    s.max_iterations = 17;
    s.direction_weight = 2.5;
    s.pin_root = false;
    const IkSettings s2 = parse_ik_settings(ik_settings_to_json(s));
    CHECK(s2.max_iterations == 17);
    CHECK(s2.direction_weight == 2.5);
    CHECK_FALSE(s2.pin_root);

    std::vector<Strut> struts{{"tip", "spine4", BoneEnd::Tail, Vec3(0.5, -1.0, 2.0)}};
    const auto struts2 = parse_struts(struts_to_json(struts));
    REQUIRE(struts2.size() == 1);
    CHECK(struts2[0].coil_name == "tip");
    CHECK((struts2[0].offset - struts[0].offset).norm() == 0.0);
}

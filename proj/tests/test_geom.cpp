#include <doctest.h>

#include <random>

#include "emarig/geom.hpp"

using namespace emarig;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Vec3 v(n(rng), n(rng), n(rng));
    while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
    return v.normalized();
}

}  // namespace

TEST_CASE("rotate_arc maps a onto b and preserves norms") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const Vec3 a = random_unit(rng);
        Vec3 b = random_unit(rng);
        if (a.dot(b) < -0.99) b = -b;  // stay away from the antipodal clamp
        CHECK((rotate_arc(a, b, a) - b).norm() < 1e-12);

        const Vec3 x = random_unit(rng) * 3.7;
        CHECK(rotate_arc(a, b, x).norm() == doctest::Approx(x.norm()).epsilon(1e-12));
        // a rotation keeps angles: <Rx, Rb> == <x, b>
        CHECK(rotate_arc(a, b, x).dot(rotate_arc(a, b, b)) == doctest::Approx(x.dot(b)).epsilon(1e-10));
    }
}

TEST_CASE("rotate_arc with identical endpoints is the identity") {
    const Vec3 a = Vec3(0.3, -0.4, 0.5).normalized();
    const Vec3 x(1.0, 2.0, 3.0);
    CHECK((rotate_arc(a, a, x) - x).norm() < 1e-15);
}

TEST_CASE("rotate_arc_jacobian matches central differences") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Vec3 a = random_unit(rng);
        Vec3 b = random_unit(rng);
        if (a.dot(b) < -0.9) b = -b;
        const Vec3 x = random_unit(rng) * 2.0;

        const Mat3 J = rotate_arc_jacobian(a, b, x);
        const double h = 1e-7;
        for (int c = 0; c < 3; ++c) {
            Vec3 hi = b, lo = b;
            hi(c) += h;
            lo(c) -= h;
            const Vec3 col = (rotate_arc(a, hi, x) - rotate_arc(a, lo, x)) / (2.0 * h);
            CHECK((J.col(c) - col).norm() < 1e-6 * (1.0 + col.norm()));
        }
    }
}

TEST_CASE("arc_rotation is orthonormal with determinant one") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 20; ++i) {
        const Vec3 a = random_unit(rng);
        Vec3 b = random_unit(rng);
        if (a.dot(b) < -0.99) b = -b;
        const Mat3 r = arc_rotation(a, b);
        CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-10);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("coil_frame builds a right-handed frame with the axis third") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        const Vec3 d = random_unit(rng);
        const Mat3 f = coil_frame(d);
        CHECK((f.col(2) - d).norm() < 1e-12);
        CHECK((f * f.transpose() - Mat3::Identity()).norm() < 1e-10);
        CHECK(f.determinant() == doctest::Approx(1.0).epsilon(1e-10));
    }
    // fallback when the axis is nearly +-z
    const Mat3 f = coil_frame(Vec3::UnitZ());
    CHECK((f.col(2) - Vec3::UnitZ()).norm() < 1e-12);
    CHECK(f.determinant() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
    CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(2.0 * M_PI) == doctest::Approx(0.0));
    CHECK(wrap_angle(350.0 * M_PI / 180.0) == doctest::Approx(-10.0 * M_PI / 180.0));
}

TEST_CASE("point_segment_distance handles interior and endpoint projections") {
    const Vec3 a(0, 0, 0), b(10, 0, 0);
    CHECK(point_segment_distance(Vec3(5, 3, 0), a, b) == doctest::Approx(3.0));
    CHECK(point_segment_distance(Vec3(-4, 3, 0), a, b) == doctest::Approx(5.0));
    CHECK(point_segment_distance(Vec3(14, 0, 3), a, b) == doctest::Approx(5.0));
    CHECK(point_segment_distance(Vec3(2, 0, 0), a, a) == doctest::Approx(2.0));  // degenerate
}

TEST_CASE("hermite curve interpolates endpoints and tangents") {
    const Vec3 p0(1, 2, 3), p1(4, -1, 0), m0(2, 0, 1), m1(-1, 1, 0);
    CHECK((hermite_point(p0, m0, p1, m1, 0.0) - p0).norm() < 1e-15);
    CHECK((hermite_point(p0, m0, p1, m1, 1.0) - p1).norm() < 1e-15);
    CHECK((hermite_derivative(p0, m0, p1, m1, 0.0) - m0).norm() < 1e-15);
    CHECK((hermite_derivative(p0, m0, p1, m1, 1.0) - m1).norm() < 1e-15);
}

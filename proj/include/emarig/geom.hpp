#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace emarig {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

// Rotate vector x by the shortest-arc rotation taking unit vector a onto
// unit vector b. Closed form:
//   R(a->b) x = x + v%x + (v%(v%x)) / (1 + a.b),   v = a%b
// The denominator is clamped near the antipodal singularity; callers stay
// away from 180-degree joint flips.
inline Vec3 rotate_arc(const Vec3& a, const Vec3& b, const Vec3& x) {
    const Vec3 v = a.cross(b);
    const double s = std::max(1.0 + a.dot(b), 1e-8);
    const Vec3 g = v.cross(x);
    return x + g + v.cross(g) / s;
}

// d(rotate_arc(a, b, x)) / db for fixed unit a, x. Matches rotate_arc
// including the clamp.
inline Mat3 rotate_arc_jacobian(const Vec3& a, const Vec3& b, const Vec3& x) {
    const Vec3 v = a.cross(b);
    const double s = 1.0 + a.dot(b);
    const Vec3 g = v.cross(x);
    const Vec3 h = v.cross(g);
    const Mat3 ax = skew(a);
    const Mat3 dg = -skew(x) * ax;
    if (s <= 1e-8) return dg;  // clamped region: 1/s constant
    const Mat3 dh = -skew(v) * skew(x) * ax - skew(g) * ax;
    return dg + dh / s - (h * a.transpose()) / (s * s);
}

// Shortest-arc rotation matrix taking unit a onto unit b.
inline Mat3 arc_rotation(const Vec3& a, const Vec3& b) {
    Mat3 r;
    for (int c = 0; c < 3; ++c) r.col(c) = rotate_arc(a, b, Vec3::Unit(c));
    return r;
}

// Deterministic orthonormal frame for a unit coil axis d: columns
// (e1, e2, d) with e1 the projection of world +z onto the plane normal to d,
// falling back to +y when d is close to +-z.
inline Mat3 coil_frame(const Vec3& d) {
    Vec3 e1 = Vec3::UnitZ() - d.z() * d;
    if (e1.norm() < 1e-6) e1 = Vec3::UnitY() - d.y() * d;
    e1.normalize();
    Mat3 f;
    f.col(0) = e1;
    f.col(1) = d.cross(e1);
    f.col(2) = d;
    return f;
}

// Rotation about an axis already part of a frame, used for bone twist.
inline Mat3 axis_rotation(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Distance from point p to segment [a, b].
inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 < 1e-24) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Cubic Hermite basis at parameter s.
struct HermiteBasis {
    double h00, h10, h01, h11;    // value weights
    double d00, d10, d01, d11;    // derivative weights
};

inline HermiteBasis hermite_basis(double s) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    HermiteBasis b;
    b.h00 = 2 * s3 - 3 * s2 + 1;
    b.h10 = s3 - 2 * s2 + s;
    b.h01 = -2 * s3 + 3 * s2;
    b.h11 = s3 - s2;
    b.d00 = 6 * s2 - 6 * s;
    b.d10 = 3 * s2 - 4 * s + 1;
    b.d01 = -6 * s2 + 6 * s;
    b.d11 = 3 * s2 - 2 * s;
    return b;
}

inline Vec3 hermite_point(const Vec3& p0, const Vec3& m0, const Vec3& p1, const Vec3& m1, double s) {
    const HermiteBasis b = hermite_basis(s);
    return b.h00 * p0 + b.h10 * m0 + b.h01 * p1 + b.h11 * m1;
}

inline Vec3 hermite_derivative(const Vec3& p0, const Vec3& m0, const Vec3& p1, const Vec3& m1, double s) {
    const HermiteBasis b = hermite_basis(s);
    return b.d00 * p0 + b.d10 * m0 + b.d01 * p1 + b.d11 * m1;
}

}  // namespace emarig

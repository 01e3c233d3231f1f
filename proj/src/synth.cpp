#include "emarig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "emarig/error.hpp"

namespace emarig {

namespace {

// Explicit samplers on top of mt19937_64 keep output identical across
// standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    Vec3 normal3() { return Vec3(normal(), normal(), normal()); }

    Vec3 unit_vector() {
        Vec3 v = normal3();
        while (v.norm() < 1e-12) v = normal3();
        return v.normalized();
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

SynthResult generate_gesture(const Rig& rig, const std::vector<Strut>& struts,
                             const CoilLayout& layout,
                             const std::map<std::string, Vec3>& reference_pose,
                             const std::vector<GestureStep>& script, double rate,
                             const NoiseSettings& noise, uint64_t seed,
                             const HeadMotionSettings& head_motion) {
    if (script.empty()) throw Error("gesture script is empty");
    if (!(rate > 0.0)) throw Error("rate must be positive");

    // Scripted pose track: blend toward each target, then hold it. Blended
    // stretch is re-derived from the chord so every frame satisfies the pose
    // definition exactly.
    std::vector<Pose> poses;
    Pose prev = rest_pose(rig);
    for (const GestureStep& step : script) {
        for (long k = 0; k < step.transition_frames; ++k) {
            const double t = double(k + 1) / double(step.transition_frames + 1);
            Pose blended = blend_poses(prev, step.target, t);
            for (int b = 0; b < rig.bone_count(); ++b) {
                blended.bones[b].stretch =
                    (blended.bones[b].tail - blended.bones[b].head).norm() / rig.bone(b).rest_length();
            }
            poses.push_back(std::move(blended));
        }
        for (long k = 0; k < step.hold_frames; ++k) poses.push_back(step.target);
        prev = step.target;
    }
    if (poses.empty()) throw Error("gesture script produces no frames");

    std::vector<std::string> coil_names;
    for (const Strut& s : struts) {
        if (std::find(coil_names.begin(), coil_names.end(), s.coil_name) == coil_names.end()) {
            coil_names.push_back(s.coil_name);
        }
    }
    std::vector<std::pair<std::string, Vec3>> references;
    for (const std::string& name : layout.reference_names()) {
        const auto it = reference_pose.find(name);
        if (it == reference_pose.end()) continue;
        references.emplace_back(name, it->second);
        coil_names.push_back(name);
    }

    const long n = static_cast<long>(poses.size());
    EmaSweep sweep(rate, coil_names, n);
    SynthResult result;

    // Forward pass: coils placed so strut targets reproduce the posed
    // endpoints exactly, directions following the bone end tangents.
    for (long f = 0; f < n; ++f) {
        const Pose& pose = poses[f];
        for (const Strut& strut : struts) {
            const int coil = sweep.coil_index(strut.coil_name);
            const int bone = rig.bone_index(strut.bone_name);
            if (bone < 0) throw Error("unknown bone '" + strut.bone_name + "' in struts");
            const Vec3 endpoint =
                strut.end == BoneEnd::Head ? pose.bones[bone].head : pose.bones[bone].tail;
            CoilSample& s = sweep.at(f, coil);
            s.direction = end_tangent(rig, bone, strut.end, pose);
            s.position = endpoint - coil_frame(s.direction) * strut.offset;
            s.valid = true;
        }
        for (const auto& [name, position] : references) {
            CoilSample& s = sweep.at(f, sweep.coil_index(name));
            s.position = position;
            s.direction = Vec3::UnitZ();
            s.valid = true;
        }
    }
    result.truth.poses = std::move(poses);

    if (head_motion.rotation_amplitude != 0.0 || head_motion.translation_amplitude != 0.0) {
        const Vec3 axis = Vec3(1.0, 0.4, 0.2).normalized();
        for (long f = 0; f < n; ++f) {
            const double phase = 2.0 * M_PI * (double(f) / rate) / head_motion.period_s;
            const Mat3 r = axis_rotation(axis, head_motion.rotation_amplitude * std::sin(phase));
            const Vec3 t = head_motion.translation_amplitude *
                           Vec3(std::sin(phase), std::sin(phase * 0.7 + 1.0), std::cos(phase * 1.3));
            for (int c = 0; c < sweep.coil_count(); ++c) {
                CoilSample& s = sweep.at(f, c);
                s.position = r * s.position + t;
                s.direction = r * s.direction;
            }
        }
    }

    // Noise after the ground truth is recorded.
    Rng rng(seed);
    for (long f = 0; f < n; ++f) {
        for (int c = 0; c < sweep.coil_count(); ++c) {
            CoilSample& s = sweep.at(f, c);
            if (noise.sigma_pos > 0.0) s.position += noise.sigma_pos * rng.normal3();
            if (noise.outlier_rate > 0.0 && rng.uniform() < noise.outlier_rate) {
                s.position += rng.unit_vector() * rng.uniform(noise.outlier_min, noise.outlier_max);
                result.truth.outliers.push_back({f, sweep.coil_names()[c]});
            }
            if (noise.dropout_rate > 0.0 && rng.uniform() < noise.dropout_rate) {
                s.valid = false;
                result.truth.dropouts.push_back({f, sweep.coil_names()[c]});
            }
        }
    }

    result.sweep = std::move(sweep);
    return result;
}

}  // namespace emarig

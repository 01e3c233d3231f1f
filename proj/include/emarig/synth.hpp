#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emarig/nla.hpp"
#include "emarig/rig.hpp"

namespace emarig {

// One script step: blend to the target pose over transition frames, then
// hold it.
struct GestureStep {
    Pose target;
    long hold_frames = 0;
    long transition_frames = 0;
};

struct NoiseSettings {
    double sigma_pos = 0.0;     // mm, per component
    double outlier_rate = 0.0;  // per (frame, coil)
    double dropout_rate = 0.0;
    double outlier_min = 20.0;  // mm
    double outlier_max = 50.0;
};

// Slow sinusoidal rigid head motion applied to all coils, removed again by
// head correction.
struct HeadMotionSettings {
    double rotation_amplitude = 0.0;     // radians
    double translation_amplitude = 0.0;  // mm
    double period_s = 4.0;
};

struct InjectionRecord {
    long frame = 0;
    std::string coil;
};

struct GestureTruth {
    std::vector<Pose> poses;  // pre-noise, head-frame ground truth
    std::vector<InjectionRecord> outliers;
    std::vector<InjectionRecord> dropouts;
};

struct SynthResult {
    EmaSweep sweep;
    GestureTruth truth;
};

// Scripts a known rig animation, forward-evaluates coil trajectories through
// the struts (so strut targets reproduce the posed endpoints exactly), then
// applies noise after the ground truth is recorded. Reference coils from the
// layout are emitted at fixed positions so the sweep can be head-corrected.
// Deterministic for a fixed seed.
SynthResult generate_gesture(const Rig& rig, const std::vector<Strut>& struts,
                             const CoilLayout& layout,
                             const std::map<std::string, Vec3>& reference_pose,
                             const std::vector<GestureStep>& script, double rate,
                             const NoiseSettings& noise, uint64_t seed,
                             const HeadMotionSettings& head_motion = {});

}  // namespace emarig

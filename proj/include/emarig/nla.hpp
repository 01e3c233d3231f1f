#pragma once

#include <string>
#include <vector>

#include "emarig/ik.hpp"
#include "emarig/rig.hpp"

namespace emarig {

struct ActionSource {
    std::string sweep_id;
    long start_frame = 0;
    long end_frame = 0;  // exclusive
};

// Reusable pose clip cut from a solved sweep.
struct Action {
    std::string name;
    std::vector<Pose> frames;
    double rate = 0.0;  // Hz
    ActionSource source;

    long length() const { return static_cast<long>(frames.size()); }
};

struct TimelineEntry {
    std::string action;
    long crossfade_frames = 0;  // overlap blended into the next entry
};

struct Timeline {
    std::vector<TimelineEntry> entries;
};

// One Action per annotation; unannotated frames are ignored. Overlapping
// annotations with identical labels are rejected.
std::vector<Action> segment_actions(const std::vector<FrameSolve>& solves,
                                    const std::vector<Annotation>& annotations, double rate,
                                    const std::string& sweep_id = {});

// Endpoint positions lerp, twists take the shortest angular path, stretch
// lerps. t=0 returns a and t=1 returns b exactly.
Pose blend_poses(const Pose& a, const Pose& b, double t);

// Concatenates entries; a crossfade of n frames blends the outgoing tail
// into the incoming head with a linear ramp, so the resolved length is
// sum(lengths) - sum(crossfades).
Action resolve_timeline(const Timeline& timeline, const std::vector<Action>& actions);

}  // namespace emarig

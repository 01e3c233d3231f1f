#include "emarig/nla.hpp"

#include <algorithm>
#include <map>

#include "emarig/error.hpp"

namespace emarig {

std::vector<Action> segment_actions(const std::vector<FrameSolve>& solves,
                                    const std::vector<Annotation>& annotations, double rate,
                                    const std::string& sweep_id) {
    const long n = static_cast<long>(solves.size());
    for (size_t i = 0; i < annotations.size(); ++i) {
        const Annotation& a = annotations[i];
        if (a.start_frame < 0 || a.end_frame <= a.start_frame || a.end_frame > n) {
            throw Error("annotation '" + a.label + "' outside solved range");
        }
        for (size_t j = i + 1; j < annotations.size(); ++j) {
            const Annotation& b = annotations[j];
            if (a.label == b.label && a.start_frame < b.end_frame && b.start_frame < a.end_frame) {
                throw Error("overlapping annotations with identical label '" + a.label + "'");
            }
        }
    }

    std::vector<Action> actions;
    actions.reserve(annotations.size());
    for (const Annotation& a : annotations) {
        Action action;
        action.name = a.label;
        action.rate = rate;
        action.source = {sweep_id, a.start_frame, a.end_frame};
        action.frames.reserve(a.end_frame - a.start_frame);
        for (long f = a.start_frame; f < a.end_frame; ++f) action.frames.push_back(solves[f].pose);
        actions.push_back(std::move(action));
    }
    return actions;
}

Pose blend_poses(const Pose& a, const Pose& b, double t) {
    if (a.bones.size() != b.bones.size()) throw Error("cannot blend poses of different rigs");
    Pose out;
    out.bones.resize(a.bones.size());
    for (size_t i = 0; i < a.bones.size(); ++i) {
        const BonePose& pa = a.bones[i];
        const BonePose& pb = b.bones[i];
        BonePose& po = out.bones[i];
        po.head = (1.0 - t) * pa.head + t * pb.head;
        po.tail = (1.0 - t) * pa.tail + t * pb.tail;
        po.head_twist = wrap_angle(pa.head_twist + t * wrap_angle(pb.head_twist - pa.head_twist));
        po.tail_twist = wrap_angle(pa.tail_twist + t * wrap_angle(pb.tail_twist - pa.tail_twist));
        po.stretch = (1.0 - t) * pa.stretch + t * pb.stretch;
        if (t == 0.0) po = pa;
        if (t == 1.0) po = pb;
    }
    return out;
}

Action resolve_timeline(const Timeline& timeline, const std::vector<Action>& actions) {
    if (timeline.entries.empty()) throw Error("empty timeline");

    std::map<std::string, const Action*> library;
    for (const Action& a : actions) {
        if (!library.emplace(a.name, &a).second) throw Error("duplicate action name '" + a.name + "'");
    }
    auto lookup = [&](const std::string& name) -> const Action& {
        const auto it = library.find(name);
        if (it == library.end()) throw Error("unknown action '" + name + "'");
        return *it->second;
    };

    const Action& first = lookup(timeline.entries[0].action);
    Action out;
    out.name = "timeline";
    out.rate = first.rate;
    out.frames = first.frames;

    for (size_t e = 1; e < timeline.entries.size(); ++e) {
        const Action& incoming = lookup(timeline.entries[e].action);
        if (incoming.rate != out.rate) {
            throw Error("rate mismatch: action '" + incoming.name + "' at " + std::to_string(incoming.rate) +
                        " Hz on a " + std::to_string(out.rate) + " Hz timeline");
        }
        const long fade = timeline.entries[e - 1].crossfade_frames;
        if (fade < 0) throw Error("negative crossfade");
        const long prev_len = lookup(timeline.entries[e - 1].action).length();
        if (fade >= prev_len || fade >= incoming.length()) {
            throw Error("crossfade of " + std::to_string(fade) + " frames is longer than an adjacent action");
        }
        const long overlap_start = static_cast<long>(out.frames.size()) - fade;
        for (long k = 0; k < fade; ++k) {
            const double t = fade > 1 ? double(k) / double(fade - 1) : 0.5;
            out.frames[overlap_start + k] = blend_poses(out.frames[overlap_start + k], incoming.frames[k], t);
        }
        for (long k = fade; k < incoming.length(); ++k) out.frames.push_back(incoming.frames[k]);
    }
    return out;
}

}  // namespace emarig

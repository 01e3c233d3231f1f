#include "emarig/ik.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <Eigen/Cholesky>

#include "emarig/error.hpp"

namespace emarig {

namespace {

constexpr double kStepTolerance = 1e-6;  // mm, stationarity exit
constexpr double kLambdaMax = 1e12;

}  // namespace

IkProblem::IkProblem(const Rig& rig, std::vector<StrutTarget> targets, const IkSettings& settings,
                     const std::optional<Pose>& warm_start)
    : rig_(rig), targets_(std::move(targets)), settings_(settings) {
    joint_param_.assign(rig_.joint_count(), -1);
    int offset = 0;
    for (int j = 0; j < rig_.joint_count(); ++j) {
        if (j == 0 && settings_.pin_root) continue;
        joint_param_[j] = offset;
        offset += 3;
    }
    twist_base_ = offset;
    const int params = offset + 2 * rig_.bone_count();

    rest_params_ = Eigen::VectorXd::Zero(params);
    for (int j = 0; j < rig_.joint_count(); ++j) {
        if (joint_param_[j] >= 0) rest_params_.segment<3>(joint_param_[j]) = rig_.rest_joint(j);
    }
    if (warm_start) warm_params_ = pack(*warm_start);
}

Eigen::VectorXd IkProblem::pack(const Pose& pose) const {
    Eigen::VectorXd params = rest_params_;
    for (int b = 0; b < rig_.bone_count(); ++b) {
        const int tj = joint_param_[rig_.tail_joint(b)];
        if (tj >= 0) params.segment<3>(tj) = pose.bones[b].tail;
        if (rig_.parent(b) < 0) {
            const int hj = joint_param_[rig_.head_joint(b)];
            if (hj >= 0) params.segment<3>(hj) = pose.bones[b].head;
        }
        params(twist_base_ + 2 * b) = pose.bones[b].head_twist;
        params(twist_base_ + 2 * b + 1) = pose.bones[b].tail_twist;
    }
    return params;
}

Vec3 IkProblem::joint_position(const Eigen::VectorXd& params, int joint) const {
    if (joint_param_[joint] < 0) return rig_.rest_joint(joint);
    return params.segment<3>(joint_param_[joint]);
}

Pose IkProblem::unpack(const Eigen::VectorXd& params) const {
    Pose pose;
    pose.bones.resize(rig_.bone_count());
    for (int b = 0; b < rig_.bone_count(); ++b) {
        BonePose& bp = pose.bones[b];
        bp.head = joint_position(params, rig_.head_joint(b));
        bp.tail = joint_position(params, rig_.tail_joint(b));
        bp.head_twist = params(twist_base_ + 2 * b);
        bp.tail_twist = params(twist_base_ + 2 * b + 1);
        bp.stretch = (bp.tail - bp.head).norm() / rig_.bone(b).rest_length();
    }
    return pose;
}

// Unit joint direction at a bone end plus the linear dependency of the
// pre-normalization vector on joint positions.
void IkProblem::joint_direction(const Eigen::VectorXd& params, int bone, BoneEnd end, Vec3& dir,
                                std::vector<std::pair<int, double>>& deps) const {
    deps.clear();
    Vec3 v;
    if (end == BoneEnd::Head && rig_.parent(bone) >= 0) {
        const int p = rig_.parent(bone);
        deps.emplace_back(rig_.tail_joint(bone), 1.0);
        deps.emplace_back(rig_.head_joint(p), -1.0);
        v = joint_position(params, rig_.tail_joint(bone)) - joint_position(params, rig_.head_joint(p));
    } else if (end == BoneEnd::Tail && !rig_.children(bone).empty()) {
        const auto& kids = rig_.children(bone);
        const double w = 1.0 / double(kids.size());
        v = Vec3::Zero();
        for (int c : kids) {
            deps.emplace_back(rig_.tail_joint(c), w);
            v += w * joint_position(params, rig_.tail_joint(c));
        }
        deps.emplace_back(rig_.head_joint(bone), -1.0);
        v -= joint_position(params, rig_.head_joint(bone));
    } else {
        deps.emplace_back(rig_.tail_joint(bone), 1.0);
        deps.emplace_back(rig_.head_joint(bone), -1.0);
        v = joint_position(params, rig_.tail_joint(bone)) - joint_position(params, rig_.head_joint(bone));
    }
    const double n = v.norm();
    dir = n > 1e-12 ? Vec3(v / n) : Vec3::UnitY();
    deps.emplace_back(-1, n);  // norm piggybacked for the jacobian chain
}

Eigen::VectorXd IkProblem::residuals(const Eigen::VectorXd& params) const {
    const int t = static_cast<int>(targets_.size());
    const int p = parameter_count();
    const bool use_dir = settings_.direction_weight > 0.0;
    const bool use_warm = warm_params_.has_value() && settings_.temporal_weight > 0.0;
    const bool use_rest = settings_.rest_weight > 0.0;

    int rows = 3 * t + (use_dir ? t : 0) + (use_warm ? p : 0) + (use_rest ? p : 0);
    Eigen::VectorXd r(rows);
    int row = 0;

    for (const StrutTarget& target : targets_) {
        const double sw = std::sqrt(target.weight);
        const int joint = target.end == BoneEnd::Head ? rig_.head_joint(target.bone) : rig_.tail_joint(target.bone);
        r.segment<3>(row) = sw * (joint_position(params, joint) - target.position);
        row += 3;
    }
    if (use_dir) {
        std::vector<std::pair<int, double>> deps;
        for (const StrutTarget& target : targets_) {
            const double sw = std::sqrt(target.weight);
            Vec3 dir;
            joint_direction(params, target.bone, target.end, dir, deps);
            const Vec3 a = rest_joint_direction(rig_, target.bone, target.end);
            const Vec3 tangent = rotate_arc(a, dir, rig_.bone(target.bone).rest_axis());
            r(row++) = settings_.direction_weight * sw * (1.0 - tangent.dot(target.direction));
        }
    }
    if (use_warm) {
        r.segment(row, p) = settings_.temporal_weight * (params - *warm_params_);
        row += p;
    }
    if (use_rest) {
        r.segment(row, p) = settings_.rest_weight * (params - rest_params_);
        row += p;
    }
    return r;
}

Eigen::MatrixXd IkProblem::jacobian(const Eigen::VectorXd& params) const {
    const int t = static_cast<int>(targets_.size());
    const int p = parameter_count();
    const bool use_dir = settings_.direction_weight > 0.0;
    const bool use_warm = warm_params_.has_value() && settings_.temporal_weight > 0.0;
    const bool use_rest = settings_.rest_weight > 0.0;

    int rows = 3 * t + (use_dir ? t : 0) + (use_warm ? p : 0) + (use_rest ? p : 0);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(rows, p);
    int row = 0;

    for (const StrutTarget& target : targets_) {
        const double sw = std::sqrt(target.weight);
        const int joint = target.end == BoneEnd::Head ? rig_.head_joint(target.bone) : rig_.tail_joint(target.bone);
        if (joint_param_[joint] >= 0) {
            J.block<3, 3>(row, joint_param_[joint]) = sw * Mat3::Identity();
        }
        row += 3;
    }
    if (use_dir) {
        std::vector<std::pair<int, double>> deps;
        for (const StrutTarget& target : targets_) {
            const double sw = std::sqrt(target.weight);
            Vec3 dir;
            joint_direction(params, target.bone, target.end, dir, deps);
            const double norm = deps.back().second;
            deps.pop_back();
            const Vec3 a = rest_joint_direction(rig_, target.bone, target.end);
            const Vec3 axis = rig_.bone(target.bone).rest_axis();
            // d residual / d dir, then chain through the normalization.
            const Eigen::RowVector3d dr_ddir =
                -settings_.direction_weight * sw * target.direction.transpose() *
                rotate_arc_jacobian(a, dir, axis);
            const Mat3 dnorm = (Mat3::Identity() - dir * dir.transpose()) / std::max(norm, 1e-12);
            const Eigen::RowVector3d dr_dv = dr_ddir * dnorm;
            for (const auto& [joint, coeff] : deps) {
                if (joint_param_[joint] >= 0) {
                    J.block<1, 3>(row, joint_param_[joint]) += coeff * dr_dv;
                }
            }
            ++row;
        }
    }
    if (use_warm) {
        J.block(row, 0, p, p) = settings_.temporal_weight * Eigen::MatrixXd::Identity(p, p);
        row += p;
    }
    if (use_rest) {
        J.block(row, 0, p, p) = settings_.rest_weight * Eigen::MatrixXd::Identity(p, p);
        row += p;
    }
    return J;
}

double IkProblem::target_rms(const Eigen::VectorXd& params) const {
    double sum = 0.0;
    double weight = 0.0;
    for (const StrutTarget& target : targets_) {
        const int joint = target.end == BoneEnd::Head ? rig_.head_joint(target.bone) : rig_.tail_joint(target.bone);
        sum += target.weight * (joint_position(params, joint) - target.position).squaredNorm();
        weight += target.weight;
    }
    return weight > 0.0 ? std::sqrt(sum / weight) : 0.0;
}

FrameSolve solve_targets(const Rig& rig, std::vector<StrutTarget> targets,
                         const std::optional<Pose>& warm_start, const IkSettings& settings) {
    for (const StrutTarget& t : targets) {
        if (!t.position.allFinite() || !t.direction.allFinite() || !std::isfinite(t.weight)) {
            throw Error("non-finite strut target for coil '" + t.coil_name + "'");
        }
    }
    if (warm_start && !warm_start->finite()) throw Error("non-finite warm start pose");

    IkProblem problem(rig, std::move(targets), settings, warm_start);
    Eigen::VectorXd x = warm_start ? problem.pack(*warm_start) : problem.rest_parameters();

    double cost = problem.residuals(x).squaredNorm();
    double lambda = settings.damping;
    FrameSolve solve;
    solve.cost_history.push_back(cost);

    const int p = problem.parameter_count();
    int iter = 0;
    for (; iter < settings.max_iterations; ++iter) {
        const Eigen::VectorXd r = problem.residuals(x);
        const Eigen::MatrixXd J = problem.jacobian(x);
        const Eigen::MatrixXd H = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        double step_norm = 0.0;
        bool accepted = false;
        while (lambda <= kLambdaMax) {
            const Eigen::VectorXd step =
                (H + lambda * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(-g);
            const Eigen::VectorXd x_new = x + step;
            const double cost_new = problem.residuals(x_new).squaredNorm();
            if (cost_new <= cost) {
                x = x_new;
                cost = cost_new;
                step_norm = step.norm();
                lambda = std::max(lambda * 0.5, 1e-12);
                accepted = true;
                solve.cost_history.push_back(cost);
                break;
            }
            lambda *= 2.0;
        }
        if (!accepted || step_norm < kStepTolerance) {
            ++iter;
            break;
        }
    }

    solve.iterations = iter;
    solve.pose = problem.unpack(x);
    solve.residual_rms = problem.target_rms(x);
    solve.converged = solve.residual_rms < settings.position_tolerance;

    solve.target_residuals.reserve(problem.targets().size());
    solve.direction_residuals.reserve(problem.targets().size());
    for (const StrutTarget& target : problem.targets()) {
        if (target.weight <= 0.0) {
            solve.target_residuals.push_back(0.0);
            solve.direction_residuals.push_back(0.0);
            continue;
        }
        const Vec3 endpoint = target.end == BoneEnd::Head ? solve.pose.bones[target.bone].head
                                                          : solve.pose.bones[target.bone].tail;
        solve.target_residuals.push_back((endpoint - target.position).norm());
        const Vec3 tangent = end_tangent(rig, target.bone, target.end, solve.pose);
        solve.direction_residuals.push_back(1.0 - tangent.dot(target.direction));
    }
    return solve;
}

FrameSolve solve_frame(const Rig& rig, const std::vector<Strut>& struts, const EmaSweep& sweep,
                       long frame, const std::optional<Pose>& warm_start, const IkSettings& settings) {
    return solve_targets(rig, strut_targets(rig, struts, sweep, frame), warm_start, settings);
}

namespace {

SweepSolve solve_range(const Rig& rig, const std::vector<Strut>& struts, const EmaSweep& sweep,
                       const IkSettings& settings, long begin, long end) {
    SweepSolve result;
    result.frames.reserve(end - begin);
    std::optional<Pose> warm = rest_pose(rig);
    for (long f = begin; f < end; ++f) {
        FrameSolve fs = solve_frame(rig, struts, sweep, f, warm, settings);
        warm = fs.pose;
        result.frames.push_back(std::move(fs));
    }
    return result;
}

void finalize_report(SweepSolve& solve, const Rig& rig) {
    double sum = 0.0;
    for (size_t f = 0; f < solve.frames.size(); ++f) {
        const FrameSolve& fs = solve.frames[f];
        sum += fs.residual_rms;
        solve.report.max_residual = std::max(solve.report.max_residual, fs.residual_rms);
        if (!fs.converged) solve.report.non_converged_frames.push_back(static_cast<long>(f));
        for (int b = 0; b < rig.bone_count(); ++b) {
            const double rest = M_PI * rig.bone(b).rest_radius * rig.bone(b).rest_radius * rig.bone(b).rest_length();
            const double drift = std::abs(bone_volume(rig.bone(b), fs.pose.bones[b]) - rest) / rest;
            solve.report.max_volume_drift = std::max(solve.report.max_volume_drift, drift);
        }
    }
    if (!solve.frames.empty()) solve.report.mean_residual = sum / double(solve.frames.size());
}

}  // namespace

SweepSolve solve_sweep(const Rig& rig, const std::vector<Strut>& struts, const EmaSweep& sweep,
                       const IkSettings& settings) {
    if (sweep.frame_count() == 0) throw Error("empty sweep");
    SweepSolve solve = solve_range(rig, struts, sweep, settings, 0, sweep.frame_count());
    finalize_report(solve, rig);
    return solve;
}

SweepSolve solve_sweep_partitioned(const Rig& rig, const std::vector<Strut>& struts,
                                   const EmaSweep& sweep, const IkSettings& settings) {
    if (sweep.frame_count() == 0) throw Error("empty sweep");
    std::vector<long> bounds{0};
    for (const Annotation& a : sweep.annotations()) {
        if (a.start_frame > 0 && a.start_frame < sweep.frame_count()) bounds.push_back(a.start_frame);
    }
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    bounds.push_back(sweep.frame_count());

    std::vector<std::future<SweepSolve>> parts;
    for (size_t i = 0; i + 1 < bounds.size(); ++i) {
        parts.push_back(std::async(std::launch::async, solve_range, std::cref(rig), std::cref(struts),
                                   std::cref(sweep), std::cref(settings), bounds[i], bounds[i + 1]));
    }

    SweepSolve solve;
    for (auto& part : parts) {
        SweepSolve chunk = part.get();
        for (FrameSolve& fs : chunk.frames) solve.frames.push_back(std::move(fs));
    }
    finalize_report(solve, rig);
    solve.report.mode = "partitioned";
    return solve;
}

double bone_volume(const BBone& bone, const BonePose& pose) {
    const double scale_cross = 1.0 / std::sqrt(pose.stretch);
    const double radius = bone.rest_radius * scale_cross;
    return M_PI * radius * radius * bone.rest_length() * pose.stretch;
}

}  // namespace emarig

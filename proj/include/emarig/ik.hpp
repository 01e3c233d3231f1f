#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emarig/rig.hpp"

namespace emarig {

struct IkSettings {
    int max_iterations = 50;
    double damping = 1e-3;             // initial Levenberg lambda
    double position_tolerance = 1e-2;  // mm, convergence on target RMS
    double direction_weight = 5.0;     // mm of equivalent error per unit (1 - cos)
    double temporal_weight = 0.1;      // pull toward warm start, mm/mm and mm/rad
    double rest_weight = 0.01;         // pull toward rest parameters
    double volume_tolerance = 1e-3;    // relative, reported in diagnostics
    bool pin_root = true;              // root head fixed to its rest position
};

struct FrameSolve {
    Pose pose;
    double residual_rms = 0.0;                 // mm over weighted targets
    std::vector<double> target_residuals;      // per target, position error norm
    std::vector<double> direction_residuals;   // per target, 1 - cos misalignment
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_history;          // objective after each accepted step
};

// Linearized parameter vector: free joint positions then per-bone end twists.
// Exposed so tests can differentiate the residual independently.
class IkProblem {
public:
    IkProblem(const Rig& rig, std::vector<StrutTarget> targets, const IkSettings& settings,
              const std::optional<Pose>& warm_start);

    int parameter_count() const { return static_cast<int>(rest_params_.size()); }
    const Eigen::VectorXd& rest_parameters() const { return rest_params_; }
    Eigen::VectorXd pack(const Pose& pose) const;
    Pose unpack(const Eigen::VectorXd& params) const;

    Eigen::VectorXd residuals(const Eigen::VectorXd& params) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& params) const;

    // RMS position error over weighted targets for diagnostics.
    double target_rms(const Eigen::VectorXd& params) const;

    const std::vector<StrutTarget>& targets() const { return targets_; }
    const Rig& rig() const { return rig_; }

private:
    struct JointDirTerm;  // joint-direction dependency of one residual row

    Vec3 joint_position(const Eigen::VectorXd& params, int joint) const;
    void joint_direction(const Eigen::VectorXd& params, int bone, BoneEnd end,
                         Vec3& dir, std::vector<std::pair<int, double>>& deps) const;

    const Rig& rig_;
    std::vector<StrutTarget> targets_;
    IkSettings settings_;
    std::optional<Eigen::VectorXd> warm_params_;
    Eigen::VectorXd rest_params_;
    std::vector<int> joint_param_;  // joint -> param offset, -1 when pinned
    int twist_base_ = 0;
};

// Damped Gauss-Newton solve of one frame. Non-convergence is not an error;
// the best pose found is returned with converged=false.
FrameSolve solve_frame(const Rig& rig, const std::vector<Strut>& struts, const EmaSweep& sweep,
                       long frame, const std::optional<Pose>& warm_start, const IkSettings& settings);

FrameSolve solve_targets(const Rig& rig, std::vector<StrutTarget> targets,
                         const std::optional<Pose>& warm_start, const IkSettings& settings);

struct SolveReport {
    double mean_residual = 0.0;
    double max_residual = 0.0;
    std::vector<long> non_converged_frames;
    double max_volume_drift = 0.0;  // relative, across bones and frames
    std::string mode = "sequential";
};

struct SweepSolve {
    std::vector<FrameSolve> frames;
    SolveReport report;
};

// Sequential solve over a sweep; frame t warm-starts from frame t-1, frame 0
// from rest.
SweepSolve solve_sweep(const Rig& rig, const std::vector<Strut>& struts, const EmaSweep& sweep,
                       const IkSettings& settings);

// Partitioned mode: the sweep is split at annotation starts, each partition
// warm-starts from rest and partitions run concurrently. Results may differ
// from sequential mode and the report says so.
SweepSolve solve_sweep_partitioned(const Rig& rig, const std::vector<Strut>& struts,
                                   const EmaSweep& sweep, const IkSettings& settings);

// pi * (rest_radius * scale_cross)^2 * rest_length * stretch; constant in
// stretch because scale_cross = 1/sqrt(stretch).
double bone_volume(const BBone& bone, const BonePose& pose);

}  // namespace emarig

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emarig/geom.hpp"

namespace emarig {

// One coil measurement: position in mm plus the coil's principal axis.
// EMA coils are 5-DOF, so orientation is a unit direction, not a full frame.
struct CoilSample {
    Vec3 position = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
    bool valid = false;
};

struct Annotation {
    std::string label;
    long start_frame = 0;  // inclusive
    long end_frame = 0;    // exclusive
};

// Dense frame-major time series of coil samples at a fixed rate.
class EmaSweep {
public:
    EmaSweep() = default;
    EmaSweep(double sample_rate, std::vector<std::string> coil_names, long frame_count);

    double sample_rate() const { return sample_rate_; }
    long frame_count() const { return static_cast<long>(coil_names_.empty() ? 0 : samples_.size() / coil_names_.size()); }
    int coil_count() const { return static_cast<int>(coil_names_.size()); }
    double duration_s() const { return frame_count() / sample_rate_; }

    const std::vector<std::string>& coil_names() const { return coil_names_; }
    int coil_index(const std::string& name) const;  // -1 when absent

    const CoilSample& at(long frame, int coil) const { return samples_[frame * coil_count() + coil]; }
    CoilSample& at(long frame, int coil) { return samples_[frame * coil_count() + coil]; }

    std::vector<Annotation>& annotations() { return annotations_; }
    const std::vector<Annotation>& annotations() const { return annotations_; }

    // Throws when an annotation falls outside the sweep or a direction of a
    // valid sample is not unit length.
    void validate() const;

private:
    double sample_rate_ = 0.0;
    std::vector<std::string> coil_names_;
    std::vector<CoilSample> samples_;  // frame-major
    std::vector<Annotation> annotations_;
};

enum class CoilRole { Tongue, Jaw, Lip, Reference };

struct CoilLayout {
    std::vector<std::pair<std::string, CoilRole>> entries;

    std::optional<CoilRole> role_of(const std::string& name) const;
    std::vector<std::string> reference_names() const;
};

struct PalateTrace {
    std::vector<Vec3> points;  // mm, head-corrected space
};

CoilRole parse_coil_role(const std::string& role);
std::string coil_role_name(CoilRole role);

// Sweep CSV: "#rate=<Hz>" line, then a header row
// "frame,<coil>_x,...,<coil>_dz" repeated per coil, one data row per frame.
// Empty or non-finite fields mark the sample invalid. A positive
// rate_override wins over the rate declared by the file.
EmaSweep parse_sweep(std::istream& in, double rate_override = 0.0);
void write_sweep(std::ostream& out, const EmaSweep& sweep);

// Plain text palate trace, one "x y z" triple per line.
PalateTrace parse_palate(std::istream& in);
void write_palate(std::ostream& out, const PalateTrace& trace);

struct FrameCorrection {
    double residual_rms = 0.0;  // mm over reference coils
    bool borrowed = false;      // correction copied from nearest solvable frame
};

struct HeadCorrectResult {
    EmaSweep sweep;
    std::vector<FrameCorrection> frames;
};

// Per frame, rigidly aligns the valid reference coils onto reference_pose
// (least-squares rotation + translation) and applies the transform to every
// coil. Frames with fewer than 3 valid references borrow the correction of
// the nearest solvable frame.
HeadCorrectResult head_correct(const EmaSweep& sweep, const CoilLayout& layout,
                               const std::map<std::string, Vec3>& reference_pose);

// Linear position resampling with normalized-lerp directions.
EmaSweep resample(const EmaSweep& sweep, double target_rate);

enum class RepairReason { SpeedOutlier, MedianOutlier, GapFilled, GapUnfilled, CoilDead };

struct Repair {
    std::string coil;
    long first_frame = 0;
    long last_frame = 0;  // inclusive
    RepairReason reason = RepairReason::SpeedOutlier;
};

struct CleanSettings {
    double max_speed = 500.0;   // mm/s, frame-to-frame
    int median_window = 5;      // odd, >= 3
    double hampel_k = 3.0;      // MAD multiplier for the sliding-median outlier test
    double mad_floor = 1.0;     // mm, deviations under this are never outliers
};

struct CleanReport {
    std::vector<Repair> repairs;
    long flagged_samples = 0;
    long filled_samples = 0;
};

struct CleanResult {
    EmaSweep sweep;
    CleanReport report;
};

// Flags speed and sliding-median outliers per coil, then fills invalid runs
// shorter than the median window by linear interpolation. Samples that are
// not flagged are never altered.
CleanResult clean(const EmaSweep& sweep, const CleanSettings& settings);

std::string repair_reason_name(RepairReason reason);

}  // namespace emarig

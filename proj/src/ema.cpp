#include "emarig/ema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>

#include "emarig/error.hpp"

namespace emarig {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

// Empty fields mean "missing"; anything else must parse as a double
// (NaN/inf spellings included).
double parse_field(const std::string& field, long line) {
    if (field.empty()) return std::nan("");
    const char* begin = field.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0')) {
        throw ParseError("cannot parse value '" + field + "'", line);
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

Vec3 nlerp_direction(const Vec3& a, const Vec3& b, double t) {
    const Vec3 d = (1.0 - t) * a + t * b;
    const double n = d.norm();
    return n < 1e-9 ? a : Vec3(d / n);
}

struct RigidFit {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    bool degenerate = false;
};

// Least-squares rotation + translation mapping src onto dst (orthogonal
// Procrustes). Collinear source points leave the rotation ambiguous and are
// reported as degenerate.
RigidFit fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    Vec3 src_mean = Vec3::Zero();
    Vec3 dst_mean = Vec3::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
        src_mean += src[i];
        dst_mean += dst[i];
    }
    src_mean /= double(src.size());
    dst_mean /= double(src.size());

    Mat3 cov = Mat3::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
        cov += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    RigidFit fit;
    const Vec3 sv = svd.singularValues();
    fit.degenerate = sv(1) <= 1e-9 * (sv(0) + 1e-300);

    Mat3 flip = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) flip(2, 2) = -1.0;
    fit.rotation = svd.matrixV() * flip * svd.matrixU().transpose();
    fit.translation = dst_mean - fit.rotation * src_mean;
    return fit;
}

bool collinear(const std::vector<Vec3>& points) {
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : points) mean += p;
    mean /= double(points.size());
    Eigen::MatrixXd centered(points.size(), 3);
    for (size_t i = 0; i < points.size(); ++i) centered.row(i) = (points[i] - mean).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const auto& sv = svd.singularValues();
    return sv(1) <= 1e-9 * (sv(0) + 1e-300);
}

double median_of(std::vector<double>& values) {
    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        const double lo = *std::max_element(values.begin(), values.begin() + mid);
        m = 0.5 * (m + lo);
    }
    return m;
}

}  // namespace

EmaSweep::EmaSweep(double sample_rate, std::vector<std::string> coil_names, long frame_count)
    : sample_rate_(sample_rate), coil_names_(std::move(coil_names)) {
    if (sample_rate_ <= 0.0) throw Error("sample rate must be positive");
    samples_.resize(static_cast<size_t>(frame_count) * coil_names_.size());
}

int EmaSweep::coil_index(const std::string& name) const {
    for (size_t i = 0; i < coil_names_.size(); ++i) {
        if (coil_names_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void EmaSweep::validate() const {
    if (sample_rate_ <= 0.0) throw Error("sample rate must be positive");
    for (size_t i = 0; i < coil_names_.size(); ++i) {
        for (size_t j = i + 1; j < coil_names_.size(); ++j) {
            if (coil_names_[i] == coil_names_[j]) throw Error("duplicate coil name " + coil_names_[i]);
        }
    }
    for (const CoilSample& s : samples_) {
        if (!s.valid) continue;
        if (!s.position.allFinite()) throw Error("valid sample with non-finite position");
        if (std::abs(s.direction.norm() - 1.0) > 1e-6) throw Error("valid sample with non-unit direction");
    }
    for (const Annotation& a : annotations_) {
        if (a.start_frame < 0 || a.end_frame <= a.start_frame || a.end_frame > frame_count()) {
            throw Error("annotation '" + a.label + "' outside sweep");
        }
    }
}

std::optional<CoilRole> CoilLayout::role_of(const std::string& name) const {
    for (const auto& [coil, role] : entries) {
        if (coil == name) return role;
    }
    return std::nullopt;
}

std::vector<std::string> CoilLayout::reference_names() const {
    std::vector<std::string> names;
    for (const auto& [coil, role] : entries) {
        if (role == CoilRole::Reference) names.push_back(coil);
    }
    return names;
}

CoilRole parse_coil_role(const std::string& role) {
    if (role == "tongue") return CoilRole::Tongue;
    if (role == "jaw") return CoilRole::Jaw;
    if (role == "lip") return CoilRole::Lip;
    if (role == "reference") return CoilRole::Reference;
    throw Error("unknown coil role '" + role + "'");
}

std::string coil_role_name(CoilRole role) {
    switch (role) {
        case CoilRole::Tongue: return "tongue";
        case CoilRole::Jaw: return "jaw";
        case CoilRole::Lip: return "lip";
        case CoilRole::Reference: return "reference";
    }
    return "unknown";
}

EmaSweep parse_sweep(std::istream& in, double rate_override) {
    std::string line;
    long line_no = 0;

    if (!std::getline(in, line)) throw ParseError("empty sweep file", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#rate=", 0) != 0) throw ParseError("expected '#rate=<Hz>' header", line_no);
    double rate = parse_field(line.substr(6), line_no);
    if (rate_override > 0.0) rate = rate_override;
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ParseError("sample rate must be positive", line_no);

    if (!std::getline(in, line)) throw ParseError("missing column header", 2);
    ++line_no;
    const std::vector<std::string> header = split_csv(line);
    if (header.empty() || header[0] != "frame") throw ParseError("first column must be 'frame'", line_no);
    if ((header.size() - 1) % 6 != 0 || header.size() == 1) {
        throw ParseError("expected 6 columns per coil after 'frame'", line_no);
    }

    static const char* kSuffixes[6] = {"_x", "_y", "_z", "_dx", "_dy", "_dz"};
    std::vector<std::string> coil_names;
    for (size_t c = 1; c < header.size(); c += 6) {
        const std::string& first = header[c];
        if (first.size() < 3 || first.substr(first.size() - 2) != "_x") {
            throw ParseError("malformed column '" + first + "'", line_no);
        }
        const std::string name = first.substr(0, first.size() - 2);
        for (int k = 0; k < 6; ++k) {
            if (header[c + k] != name + kSuffixes[k]) {
                throw ParseError("malformed column '" + header[c + k] + "', expected '" + name + kSuffixes[k] + "'",
                                 line_no);
            }
        }
        coil_names.push_back(name);
    }

    const size_t expected_fields = 1 + 6 * coil_names.size();
    std::vector<CoilSample> samples;
    long frames = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != expected_fields) {
            throw ParseError("expected " + std::to_string(expected_fields) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        parse_field(fields[0], line_no);  // frame column, value unused
        for (size_t c = 0; c < coil_names.size(); ++c) {
            CoilSample s;
            double v[6];
            for (int k = 0; k < 6; ++k) v[k] = parse_field(fields[1 + 6 * c + k], line_no);
            s.position = Vec3(v[0], v[1], v[2]);
            s.direction = Vec3(v[3], v[4], v[5]);
            const double n = s.direction.norm();
            s.valid = s.position.allFinite() && std::isfinite(n) && n > 1e-9;
            if (s.valid) s.direction /= n;
            samples.push_back(s);
        }
        ++frames;
    }
    if (frames == 0) throw ParseError("sweep contains no data rows", line_no + 1);

    EmaSweep sweep(rate, coil_names, frames);
    for (long f = 0; f < frames; ++f) {
        for (size_t c = 0; c < coil_names.size(); ++c) {
            sweep.at(f, static_cast<int>(c)) = samples[f * coil_names.size() + c];
        }
    }
    return sweep;
}

void write_sweep(std::ostream& out, const EmaSweep& sweep) {
    out << "#rate=" << format_double(sweep.sample_rate()) << "\n";
    out << "frame";
    for (const std::string& name : sweep.coil_names()) {
        out << ',' << name << "_x," << name << "_y," << name << "_z,"
            << name << "_dx," << name << "_dy," << name << "_dz";
    }
    out << "\n";
    for (long f = 0; f < sweep.frame_count(); ++f) {
        out << f;
        for (int c = 0; c < sweep.coil_count(); ++c) {
            const CoilSample& s = sweep.at(f, c);
            if (!s.valid) {
                out << ",,,,,,";
                continue;
            }
            for (int k = 0; k < 3; ++k) out << ',' << format_double(s.position(k));
            for (int k = 0; k < 3; ++k) out << ',' << format_double(s.direction(k));
        }
        out << "\n";
    }
}

PalateTrace parse_palate(std::istream& in) {
    PalateTrace trace;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        double x, y, z;
        if (!(ss >> x)) continue;  // blank or comment-only line
        if (!(ss >> y >> z)) throw ParseError("expected 'x y z'", line_no);
        std::string trailing;
        if (ss >> trailing) throw ParseError("trailing data '" + trailing + "'", line_no);
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
            throw ParseError("non-finite palate point", line_no);
        }
        trace.points.emplace_back(x, y, z);
    }
    if (trace.points.size() < 3) throw ParseError("insufficient points: palate trace needs at least 3");
    if (collinear(trace.points)) throw ParseError("palate trace points are collinear");
    return trace;
}

void write_palate(std::ostream& out, const PalateTrace& trace) {
    for (const Vec3& p : trace.points) {
        out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << "\n";
    }
}

HeadCorrectResult head_correct(const EmaSweep& sweep, const CoilLayout& layout,
                               const std::map<std::string, Vec3>& reference_pose) {
    for (const std::string& name : sweep.coil_names()) {
        if (!layout.role_of(name)) throw Error("coil '" + name + "' has no role in the layout");
    }
    std::vector<int> ref_coils;
    std::vector<Vec3> ref_targets;
    for (const std::string& name : layout.reference_names()) {
        const int idx = sweep.coil_index(name);
        const auto it = reference_pose.find(name);
        if (idx < 0 || it == reference_pose.end()) continue;
        ref_coils.push_back(idx);
        ref_targets.push_back(it->second);
    }
    if (ref_coils.size() < 3) throw Error("head correction needs at least 3 reference coils");
    if (collinear(ref_targets)) throw Error("collinear reference configuration");

    const long n = sweep.frame_count();
    std::vector<RigidFit> fits(n);
    std::vector<char> solved(n, 0);
    std::vector<FrameCorrection> corrections(n);

    for (long f = 0; f < n; ++f) {
        std::vector<Vec3> src, dst;
        for (size_t r = 0; r < ref_coils.size(); ++r) {
            const CoilSample& s = sweep.at(f, ref_coils[r]);
            if (!s.valid) continue;
            src.push_back(s.position);
            dst.push_back(ref_targets[r]);
        }
        if (src.size() < 3) continue;
        RigidFit fit = fit_rigid(src, dst);
        if (fit.degenerate) continue;  // treated like a deficient frame
        double ss = 0.0;
        for (size_t i = 0; i < src.size(); ++i) {
            ss += (fit.rotation * src[i] + fit.translation - dst[i]).squaredNorm();
        }
        corrections[f].residual_rms = std::sqrt(ss / double(src.size()));
        fits[f] = fit;
        solved[f] = 1;
    }

    long any_solved = -1;
    for (long f = 0; f < n && any_solved < 0; ++f) {
        if (solved[f]) any_solved = f;
    }
    if (any_solved < 0) throw Error("no frame has 3 valid reference coils");

    // Borrow the nearest solvable frame's correction for deficient frames.
    for (long f = 0; f < n; ++f) {
        if (solved[f]) continue;
        long best = -1;
        for (long d = 1; d < n; ++d) {
            if (f - d >= 0 && solved[f - d]) { best = f - d; break; }
            if (f + d < n && solved[f + d]) { best = f + d; break; }
        }
        fits[f] = fits[best];
        corrections[f].residual_rms = corrections[best].residual_rms;
        corrections[f].borrowed = true;
    }

    HeadCorrectResult result{sweep, std::move(corrections)};
    for (long f = 0; f < n; ++f) {
        const RigidFit& fit = fits[f];
        for (int c = 0; c < sweep.coil_count(); ++c) {
            CoilSample& s = result.sweep.at(f, c);
            if (!s.position.allFinite()) continue;
            s.position = fit.rotation * s.position + fit.translation;
            s.direction = fit.rotation * s.direction;
        }
    }
    return result;
}

EmaSweep resample(const EmaSweep& sweep, double target_rate) {
    if (!(target_rate > 0.0)) throw Error("target rate must be positive");
    const double source_rate = sweep.sample_rate();
    const long n_in = sweep.frame_count();
    const double ratio = target_rate / source_rate;
    const long n_out = std::max<long>(1, std::llround(double(n_in) * ratio));

    EmaSweep out(target_rate, sweep.coil_names(), n_out);
    for (long k = 0; k < n_out; ++k) {
        const double t_src = double(k) / ratio;
        long i0 = static_cast<long>(std::floor(t_src));
        double frac = t_src - double(i0);
        if (i0 >= n_in - 1) { i0 = n_in - 1; frac = 0.0; }
        if (i0 < 0) { i0 = 0; frac = 0.0; }
        for (int c = 0; c < sweep.coil_count(); ++c) {
            const CoilSample& a = sweep.at(i0, c);
            if (frac < 1e-9) {
                out.at(k, c) = a;
                continue;
            }
            const CoilSample& b = sweep.at(i0 + 1, c);
            CoilSample s;
            if (a.valid && b.valid) {
                s.position = (1.0 - frac) * a.position + frac * b.position;
                s.direction = nlerp_direction(a.direction, b.direction, frac);
                s.valid = true;
            } else {
                s = frac < 0.5 ? a : b;
                s.valid = false;
            }
            out.at(k, c) = s;
        }
    }
    for (const Annotation& a : sweep.annotations()) {
        Annotation scaled = a;
        scaled.start_frame = std::clamp<long>(std::llround(double(a.start_frame) * ratio), 0, n_out - 1);
        scaled.end_frame = std::clamp<long>(std::llround(double(a.end_frame) * ratio), scaled.start_frame + 1, n_out);
        out.annotations().push_back(scaled);
    }
    return out;
}

std::string repair_reason_name(RepairReason reason) {
    switch (reason) {
        case RepairReason::SpeedOutlier: return "speed_outlier";
        case RepairReason::MedianOutlier: return "median_outlier";
        case RepairReason::GapFilled: return "gap_filled";
        case RepairReason::GapUnfilled: return "gap_unfilled";
        case RepairReason::CoilDead: return "coil_dead";
    }
    return "unknown";
}

CleanResult clean(const EmaSweep& sweep, const CleanSettings& settings) {
    if (settings.median_window < 3 || settings.median_window % 2 == 0) {
        throw Error("median window must be odd and >= 3");
    }
    const long n = sweep.frame_count();
    const double rate = sweep.sample_rate();
    const int half = settings.median_window / 2;

    CleanResult result{sweep, {}};
    EmaSweep& out = result.sweep;

    auto add_ranges = [&](const std::string& coil, const std::vector<char>& mask, RepairReason reason) {
        long start = -1;
        for (long f = 0; f <= n; ++f) {
            const bool on = f < n && mask[f];
            if (on && start < 0) start = f;
            if (!on && start >= 0) {
                result.report.repairs.push_back({coil, start, f - 1, reason});
                start = -1;
            }
        }
    };

    for (int c = 0; c < sweep.coil_count(); ++c) {
        const std::string& coil = sweep.coil_names()[c];

        bool any_valid = false;
        for (long f = 0; f < n && !any_valid; ++f) any_valid = sweep.at(f, c).valid;
        if (!any_valid) {
            result.report.repairs.push_back({coil, 0, n - 1, RepairReason::CoilDead});
            continue;
        }

        // Speed pass against the last accepted sample.
        std::vector<char> speed_flag(n, 0);
        long last_valid = -1;
        for (long f = 0; f < n; ++f) {
            if (!out.at(f, c).valid) continue;
            if (last_valid >= 0) {
                const double dt = double(f - last_valid) / rate;
                const double speed = (out.at(f, c).position - out.at(last_valid, c).position).norm() / dt;
                if (speed > settings.max_speed) {
                    speed_flag[f] = 1;
                    continue;
                }
            }
            last_valid = f;
        }

        // Sliding-median (Hampel) pass, decided on a snapshot of validity.
        std::vector<char> median_flag(n, 0);
        auto usable = [&](long f) { return out.at(f, c).valid && !speed_flag[f]; };
        for (long f = 0; f < n; ++f) {
            if (!usable(f)) continue;
            std::vector<Vec3> window;
            for (long j = std::max<long>(0, f - half); j <= std::min<long>(n - 1, f + half); ++j) {
                if (usable(j)) window.push_back(out.at(j, c).position);
            }
            if (window.size() < 3) continue;
            Vec3 med;
            for (int k = 0; k < 3; ++k) {
                std::vector<double> comp(window.size());
                for (size_t j = 0; j < window.size(); ++j) comp[j] = window[j](k);
                med(k) = median_of(comp);
            }
            std::vector<double> devs(window.size());
            for (size_t j = 0; j < window.size(); ++j) devs[j] = (window[j] - med).norm();
            const double mad = median_of(devs);
            const double threshold = std::max(settings.hampel_k * 1.4826 * mad, settings.mad_floor);
            if ((out.at(f, c).position - med).norm() > threshold) median_flag[f] = 1;
        }

        for (long f = 0; f < n; ++f) {
            if (speed_flag[f] || median_flag[f]) {
                out.at(f, c).valid = false;
                ++result.report.flagged_samples;
            }
        }
        add_ranges(coil, speed_flag, RepairReason::SpeedOutlier);
        add_ranges(coil, median_flag, RepairReason::MedianOutlier);

        // Fill invalid runs shorter than the window when anchored both sides.
        std::vector<char> filled(n, 0), unfilled(n, 0);
        long f = 0;
        while (f < n) {
            if (out.at(f, c).valid) { ++f; continue; }
            long run_end = f;
            while (run_end + 1 < n && !out.at(run_end + 1, c).valid) ++run_end;
            const long run_len = run_end - f + 1;
            const bool anchored = f > 0 && run_end < n - 1;
            if (anchored && run_len < settings.median_window) {
                const CoilSample& a = out.at(f - 1, c);
                const CoilSample& b = out.at(run_end + 1, c);
                for (long g = f; g <= run_end; ++g) {
                    const double t = double(g - f + 1) / double(run_len + 1);
                    CoilSample& s = out.at(g, c);
                    s.position = (1.0 - t) * a.position + t * b.position;
                    s.direction = nlerp_direction(a.direction, b.direction, t);
                    s.valid = true;
                    filled[g] = 1;
                    ++result.report.filled_samples;
                }
            } else {
                for (long g = f; g <= run_end; ++g) unfilled[g] = 1;
            }
            f = run_end + 1;
        }
        add_ranges(coil, filled, RepairReason::GapFilled);
        add_ranges(coil, unfilled, RepairReason::GapUnfilled);
    }
    return result;
}

}  // namespace emarig

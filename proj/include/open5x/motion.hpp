#pragma once

#include "open5x/error.hpp"
#include "open5x/kinematics.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace open5x {

enum class Axis { X = 0, Y, Z, U, V, E };

inline constexpr std::array<Axis, 6> kAllAxes{Axis::X, Axis::Y, Axis::Z, Axis::U, Axis::V, Axis::E};

inline const char* axis_name(Axis a) {
    static constexpr const char* names[] = {"X", "Y", "Z", "U", "V", "E"};
    return names[static_cast<int>(a)];
}

/// Per-axis change over one segment. U and V are in degrees and enter the
/// joint distance as if they were millimetres.
struct AxisDeltas {
    std::array<double, 6> d{};

    double& operator[](Axis a) { return d[static_cast<int>(a)]; }
    double operator[](Axis a) const { return d[static_cast<int>(a)]; }

    static AxisDeltas between(const MachinePose& from, const MachinePose& to) {
        return AxisDeltas{{to.x - from.x, to.y - from.y, to.z - from.z, to.u - from.u, to.v - from.v, to.e - from.e}};
    }
};

inline double joint_distance(const AxisDeltas& deltas) {
    double sum = 0.0;
    for (double v : deltas.d)
        sum += v * v;
    return std::sqrt(sum);
}

/// Filament length for a rectangular bead nozzle_diameter wide and
/// layer_height tall laid over segment_length.
inline double compute_extrusion(double segment_length, double nozzle_diameter, double layer_height,
                                double filament_diameter) {
    if (!(segment_length >= 0.0) || !(nozzle_diameter > 0.0) || !(layer_height > 0.0) || !(filament_diameter > 0.0))
        throw Error(ErrorCode::NonPositiveInput, "motion", "extrusion inputs must be positive");
    const double filament_area = std::numbers::pi * 0.25 * filament_diameter * filament_diameter;
    return nozzle_diameter * layer_height * segment_length / filament_area;
}

/// Below this surface length a segment counts as a pure rotation.
inline constexpr double kZeroLength = 1e-12;

/// F' = F * d / l. The nozzle then covers the surface at F.
inline double compensate_feedrate(const AxisDeltas& deltas, double surface_length, double feedrate) {
    const double d = joint_distance(deltas);
    if (surface_length <= kZeroLength) {
        if (d == 0.0)
            return feedrate;
        throw Error(ErrorCode::ZeroLengthSegment, "motion", "segment has axis motion but no surface length");
    }
    return feedrate * d / surface_length;
}

/// Shortest signed turn from `previous` to the angle `target`, ties going
/// positive. Returns the unwrapped absolute angle previous + delta.
inline double unwrap_rotary(double previous, double target) {
    double delta = std::remainder(target - previous, 360.0);
    if (delta <= -180.0)
        delta += 360.0;
    return previous + delta;
}

struct AxisLimits {
    std::array<double, 6> max_speed{}; // mm/min or deg/min

    double operator[](Axis a) const { return max_speed[static_cast<int>(a)]; }
};

/// Relative slack on the inclusive limit.
inline constexpr double kLimitSlack = 1e-9;

struct AxisViolation {
    Axis axis;
    double speed;
    double limit;
};

struct SpeedReport {
    std::array<double, 6> speeds{};
    double distance = 0.0;
    double duration_min = 0.0;
    std::vector<AxisViolation> violations;

    double worst_ratio(const AxisLimits& limits) const {
        double worst = 0.0;
        for (Axis a : kAllAxes)
            if (limits[a] > 0.0)
                worst = std::max(worst, speeds[static_cast<int>(a)] / limits[a]);
        return worst;
    }
};

/// Axis speeds when the joint-space move is executed at `feedrate`.
/// Reports, never clamps.
inline SpeedReport check_axis_speeds(const MachinePose& from, const MachinePose& to, double feedrate,
                                     const AxisLimits& limits) {
    SpeedReport report;
    const AxisDeltas deltas = AxisDeltas::between(from, to);
    report.distance = joint_distance(deltas);
    if (report.distance == 0.0 || !(feedrate > 0.0))
        return report;
    report.duration_min = report.distance / feedrate;
    for (Axis a : kAllAxes) {
        double speed = std::abs(deltas[a]) / report.duration_min;
        report.speeds[static_cast<int>(a)] = speed;
        if (speed > limits[a] * (1.0 + kLimitSlack))
            report.violations.push_back({a, speed, limits[a]});
    }
    return report;
}

/// Feedrate scaled down until no axis exceeds its limit. Unchanged when
/// already within limits.
inline double clamp_feedrate(const MachinePose& from, const MachinePose& to, double feedrate,
                             const AxisLimits& limits) {
    SpeedReport r = check_axis_speeds(from, to, feedrate, limits);
    double worst = r.worst_ratio(limits);
    return worst > 1.0 ? feedrate / worst : feedrate;
}

/// Everything known about one segment.
struct SegmentKinematics {
    AxisDeltas deltas;
    double surface_length = 0.0;
    double total_distance = 0.0;
    double feedrate = 0.0; // compensated
    std::array<double, 6> axis_speeds{};
};

inline SegmentKinematics analyze_segment(const MachinePose& from, const MachinePose& to, double surface_length,
                                         double feedrate, const AxisLimits& limits) {
    SegmentKinematics s;
    s.deltas = AxisDeltas::between(from, to);
    s.surface_length = surface_length;
    s.total_distance = joint_distance(s.deltas);
    s.feedrate = compensate_feedrate(s.deltas, surface_length, feedrate);
    s.axis_speeds = check_axis_speeds(from, to, s.feedrate, limits).speeds;
    return s;
}

} // namespace open5x

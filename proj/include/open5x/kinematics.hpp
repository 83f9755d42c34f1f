#pragma once

#include "open5x/error.hpp"
#include "open5x/geometry.hpp"

#include <cmath>
#include <string>

namespace open5x {

/// One machine state. U tilts the bed, V spins it; both in degrees. E is
/// cumulative filament, F the commanded feedrate in mm/min.
struct MachinePose {
    double x = 0.0, y = 0.0, z = 0.0;
    double u = 0.0, v = 0.0;
    double e = 0.0;
    double f = 0.0;

    bool operator==(const MachinePose&) const = default;
};

/// Where the U and V axes cross, in machine coordinates. U turns about
/// `u_axis_direction`; V about the bed normal carried by the U tilt.
struct PivotGeometry {
    Vec3 pivot_point = Vec3::Zero();
    Vec3 u_axis_direction = Vec3::UnitY();
};

struct BedAngles {
    double u = 0.0; // degrees, [0, 180]
    double v = 0.0; // degrees, (-180, 180]
};

inline constexpr double kUnitTolerance = 1e-9;

/// U = arccos(K), V = atan2(J, I). A vertical normal yields (0, 0).
inline BedAngles solve_angles(const Vec3& normal) {
    double len = normal.norm();
    if (!std::isfinite(len) || std::abs(len - 1.0) > kUnitTolerance)
        throw Error(ErrorCode::NonUnitNormal, "kinematics",
                    "normal has length " + std::to_string(len) + ", expected 1");
    double k = std::clamp(normal.z(), -1.0, 1.0);
    BedAngles a;
    a.u = rad_to_deg(std::acos(k));
    a.v = (normal.x() == 0.0 && normal.y() == 0.0) ? 0.0 : rad_to_deg(std::atan2(normal.y(), normal.x()));
    if (a.v == -180.0)
        a.v = 180.0;
    return a;
}

/// Bed rotation for the given axis values. The bed first tilts about the U
/// axis, then spins about its own tilted normal. Positive U raises the +X
/// side of the bed toward the nozzle, positive V turns the bed clockwise
/// seen from above. The pair from solve_angles brings the sample normal
/// to +Z. Spinning about the tilted normal equals tilt * Rz(-v).
inline Mat3 bed_rotation(double u_deg, double v_deg, const PivotGeometry& pivot = {}) {
    const Vec3 a = pivot.u_axis_direction.normalized();
    const double cu = std::cos(-deg_to_rad(u_deg)), su = std::sin(-deg_to_rad(u_deg)), k = 1.0 - cu;
    const double t[3][3] = {{cu + a.x() * a.x() * k, a.x() * a.y() * k - a.z() * su, a.x() * a.z() * k + a.y() * su},
                            {a.y() * a.x() * k + a.z() * su, cu + a.y() * a.y() * k, a.y() * a.z() * k - a.x() * su},
                            {a.z() * a.x() * k - a.y() * su, a.z() * a.y() * k + a.x() * su, cu + a.z() * a.z() * k}};
    const double cv = std::cos(-deg_to_rad(v_deg)), sv = std::sin(-deg_to_rad(v_deg));
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        r(i, 0) = t[i][0] * cv + t[i][1] * sv;
        r(i, 1) = t[i][1] * cv - t[i][0] * sv;
        r(i, 2) = t[i][2];
    }
    return r;
}

inline Vec3 rotate_to_machine(const Vec3& p, double u_deg, double v_deg, const PivotGeometry& pivot) {
    if (u_deg == 0.0 && v_deg == 0.0)
        return p; // exact, whatever the pivot
    return pivot.pivot_point + bed_rotation(u_deg, v_deg, pivot) * (p - pivot.pivot_point);
}

/// Inverse of rotate_to_machine: machine point back to part coordinates.
inline Vec3 rotate_to_part(const Vec3& p, double u_deg, double v_deg, const PivotGeometry& pivot) {
    if (u_deg == 0.0 && v_deg == 0.0)
        return p;
    return pivot.pivot_point + bed_rotation(u_deg, v_deg, pivot).transpose() * (p - pivot.pivot_point);
}

/// Axis values placing `position` under the nozzle with `normal` pointing up.
/// Fills x, y, z, u, v only.
inline MachinePose solve_pose(const Vec3& position, const Vec3& normal, const PivotGeometry& pivot) {
    BedAngles a = solve_angles(normal);
    Vec3 tip = rotate_to_machine(position, a.u, a.v, pivot);
    MachinePose pose;
    pose.x = tip.x();
    pose.y = tip.y();
    pose.z = tip.z();
    pose.u = a.u;
    pose.v = a.v;
    return pose;
}

} // namespace open5x

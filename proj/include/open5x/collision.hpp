#pragma once

#include "open5x/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>

namespace open5x {

struct NozzleModel {
    double tip_radius = 0.5;       // mm, flat at the tip
    double cone_half_angle = 30.0; // degrees
    double cone_length = 8.0;      // mm, measured from the tip along the axis
};

/// Solid truncated cone: tip disc of radius r0 at `tip`, widening to r1 at
/// tip + length * axis.
struct Frustum {
    Vec3 tip;
    Vec3 axis; // unit
    double r0;
    double r1;
    double length;

    static Frustum from(const NozzleModel& n, const Vec3& tip, const Vec3& axis) {
        double r1 = n.tip_radius + n.cone_length * std::tan(deg_to_rad(n.cone_half_angle));
        return {tip, axis.normalized(), n.tip_radius, r1, n.cone_length};
    }

    Vec3 top() const { return tip + length * axis; }
};

namespace detail {

inline double segment_distance_2d(double px, double py, double ax, double ay, double bx, double by) {
    double dx = bx - ax, dy = by - ay;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

} // namespace detail

/// Euclidean distance from q to the solid frustum; zero inside.
inline double distance(const Frustum& f, const Vec3& q) {
    const Vec3 d = q - f.tip;
    const double h = d.dot(f.axis);
    const double rho = (d - h * f.axis).norm();
    if (h >= 0.0 && h <= f.length && rho <= f.r0 + (f.r1 - f.r0) * h / f.length)
        return 0.0;
    // meridian half-plane: bottom edge, slanted side, top edge
    return std::min({detail::segment_distance_2d(rho, h, 0.0, 0.0, f.r0, 0.0),
                     detail::segment_distance_2d(rho, h, f.r0, 0.0, f.r1, f.length),
                     detail::segment_distance_2d(rho, h, 0.0, f.length, f.r1, f.length)});
}

/// Planar convex obstacles the nozzle is checked against.
struct Disc {
    Vec3 center;
    Vec3 normal; // unit
    double radius;
};

struct Triangle3 {
    Vec3 a, b, c;

    Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
};

namespace detail {

/// Where the linear function n.x attains its minimum over the frustum.
struct LinearMinimum {
    enum class Shape { Point, Segment, Cap } shape;
    Vec3 p0;  // the point, or one end of the segment, or the cap centre
    Vec3 p1;  // other end of the segment
    double r; // cap radius
    double value;
};

inline LinearMinimum minimize_linear(const Frustum& f, const Vec3& n) {
    const Vec3 perp = n - n.dot(f.axis) * f.axis;
    const double s = perp.norm();
    const Vec3 c0 = f.tip, c1 = f.top();
    if (s < 1e-12) {
        double v0 = n.dot(c0), v1 = n.dot(c1);
        return v0 <= v1 ? LinearMinimum{LinearMinimum::Shape::Cap, c0, c0, f.r0, v0}
                        : LinearMinimum{LinearMinimum::Shape::Cap, c1, c1, f.r1, v1};
    }
    const Vec3 out = perp / s;
    const Vec3 a0 = c0 - f.r0 * out, a1 = c1 - f.r1 * out;
    const double v0 = n.dot(a0), v1 = n.dot(a1);
    if (std::abs(v0 - v1) < 1e-12)
        return {LinearMinimum::Shape::Segment, a0, a1, 0.0, std::min(v0, v1)};
    return v0 < v1 ? LinearMinimum{LinearMinimum::Shape::Point, a0, a0, 0.0, v0}
                   : LinearMinimum{LinearMinimum::Shape::Point, a1, a1, 0.0, v1};
}

/// Region in a plane: the disc or the triangle, with 2D helpers in the
/// plane's own basis.
struct PlanarRegion {
    Vec3 origin;
    Vec3 normal;
    Vec3 e1, e2;
    std::variant<double, std::array<Vec2, 3>> shape; // disc radius or triangle corners

    Vec2 to_plane(const Vec3& p) const {
        Vec3 d = p - origin;
        return {d.dot(e1), d.dot(e2)};
    }
    Vec3 from_plane(const Vec2& q) const { return origin + q.x() * e1 + q.y() * e2; }

    static PlanarRegion of(const Disc& d) {
        PlanarRegion r;
        r.origin = d.center;
        r.normal = d.normal.normalized();
        r.e1 = r.normal.unitOrthogonal();
        r.e2 = r.normal.cross(r.e1);
        r.shape = d.radius;
        return r;
    }
    static PlanarRegion of(const Triangle3& t) {
        PlanarRegion r;
        r.origin = t.a;
        r.normal = t.normal();
        r.e1 = (t.b - t.a).normalized();
        r.e2 = r.normal.cross(r.e1);
        r.shape = std::array<Vec2, 3>{r.to_plane(t.a), r.to_plane(t.b), r.to_plane(t.c)};
        return r;
    }

    /// Distance in the plane from q to the region; zero inside.
    double planar_distance(const Vec2& q) const {
        if (auto* radius = std::get_if<double>(&shape))
            return std::max(0.0, q.norm() - *radius);
        const auto& t = std::get<std::array<Vec2, 3>>(shape);
        double c0 = cross2(t[1] - t[0], q - t[0]);
        double c1 = cross2(t[2] - t[1], q - t[1]);
        double c2 = cross2(t[0] - t[2], q - t[2]);
        if ((c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0))
            return 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i)
            best = std::min(best, segment_distance_2d(q.x(), q.y(), t[i].x(), t[i].y(), t[(i + 1) % 3].x(),
                                                      t[(i + 1) % 3].y()));
        return best;
    }

    bool segment_overlaps(const Vec2& a, const Vec2& b) const {
        if (planar_distance(a) == 0.0 || planar_distance(b) == 0.0)
            return true;
        if (auto* radius = std::get_if<double>(&shape))
            return segment_distance_2d(0.0, 0.0, a.x(), a.y(), b.x(), b.y()) <= *radius;
        const auto& t = std::get<std::array<Vec2, 3>>(shape);
        for (int i = 0; i < 3; ++i)
            if (segments_intersect(a, b, t[i], t[(i + 1) % 3]))
                return true;
        return false;
    }

    bool overlaps(const LinearMinimum& m) const {
        switch (m.shape) {
        case LinearMinimum::Shape::Point: return planar_distance(to_plane(m.p0)) == 0.0;
        case LinearMinimum::Shape::Segment: return segment_overlaps(to_plane(m.p0), to_plane(m.p1));
        case LinearMinimum::Shape::Cap: return planar_distance(to_plane(m.p0)) <= m.r;
        }
        return false;
    }

    /// Minimum over the region's boundary of the distance to the frustum.
    double boundary_distance(const Frustum& f) const {
        if (auto* radius = std::get_if<double>(&shape))
            return rim_distance(f, *radius);
        const auto& t = std::get<std::array<Vec2, 3>>(shape);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i)
            best = std::min(best, edge_distance(f, from_plane(t[i]), from_plane(t[(i + 1) % 3])));
        return best;
    }

    static double edge_distance(const Frustum& f, const Vec3& a, const Vec3& b) {
        // distance to a convex body is convex along a segment
        auto g = [&](double t) { return distance(f, a + t * (b - a)); };
        double lo = 0.0, hi = 1.0;
        constexpr double kInvPhi = 0.6180339887498949;
        double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
        double g1 = g(x1), g2 = g(x2);
        for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
            if (g1 <= g2) {
                hi = x2;
                x2 = x1;
                g2 = g1;
                x1 = hi - kInvPhi * (hi - lo);
                g1 = g(x1);
            } else {
                lo = x1;
                x1 = x2;
                g1 = g2;
                x2 = lo + kInvPhi * (hi - lo);
                g2 = g(x2);
            }
        }
        return std::min({g1, g2, g(0.0), g(1.0)});
    }

    double rim_distance(const Frustum& f, double radius) const {
        auto point = [&](double phi) { return from_plane(Vec2(radius * std::cos(phi), radius * std::sin(phi))); };
        auto g = [&](double phi) { return distance(f, point(phi)); };
        constexpr int kSamples = 720;
        const double step = 2.0 * std::numbers::pi / kSamples;
        // refine the three best sampled basins
        std::array<std::pair<double, int>, kSamples> samples;
        for (int i = 0; i < kSamples; ++i)
            samples[i] = {g(i * step), i};
        std::partial_sort(samples.begin(), samples.begin() + 3, samples.end());
        double best = samples[0].first;
        for (int c = 0; c < 3; ++c) {
            double lo = (samples[c].second - 1) * step, hi = (samples[c].second + 1) * step;
            for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
                double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                if (g(m1) <= g(m2))
                    hi = m2;
                else
                    lo = m1;
            }
            best = std::min(best, g(0.5 * (lo + hi)));
        }
        return best;
    }
};

inline double clearance(const Frustum& f, const PlanarRegion& region) {
    Vec3 n = region.normal;
    const double base = n.dot(region.origin);
    double lo = minimize_linear(f, n).value - base;
    double hi = -(minimize_linear(f, -n).value + base); // max of n.(x - origin)
    if (hi < 0.0) {
        n = -n;
        std::swap(lo, hi);
        lo = -lo;
        hi = -hi;
    }
    if (lo > 0.0) {
        // frustum entirely on one side of the plane
        if (region.overlaps(minimize_linear(f, n)))
            return lo;
        return region.boundary_distance(f);
    }
    // frustum straddles the plane
    double rim = region.boundary_distance(f);
    LinearMinimum below = minimize_linear(f, n), above = minimize_linear(f, -n);
    Vec3 a = below.p0, b = above.p0;
    double da = n.dot(a - region.origin), db = n.dot(b - region.origin);
    Vec3 crossing = (db - da) > 0.0 ? Vec3(a + (b - a) * (-da / (db - da))) : a;
    bool section_inside = region.planar_distance(region.to_plane(crossing)) == 0.0;
    if (rim <= 1e-12 || section_inside)
        return -std::min(hi, -lo);
    return rim;
}

} // namespace detail

/// Signed clearance between the nozzle and an obstacle: the Euclidean gap
/// when apart; when they overlap, minus the shortest push along the
/// obstacle normal that would clear its plane.
inline double clearance(const Frustum& f, const Disc& d) { return detail::clearance(f, detail::PlanarRegion::of(d)); }

inline double clearance(const Frustum& f, const Triangle3& t) {
    return detail::clearance(f, detail::PlanarRegion::of(t));
}

} // namespace open5x

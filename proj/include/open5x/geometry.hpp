#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace open5x {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Simple polygon in the XY plane, vertices in order, implicitly closed.
using Polygon2 = std::vector<Vec2>;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(const Polygon2& poly) {
    double area = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i)
        area += cross2(poly[i], poly[(i + 1) % n]);
    return 0.5 * area;
}

inline Vec2 centroid(const Polygon2& poly) {
    double a = 0.0;
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        double w = cross2(p, q);
        a += w;
        c += w * (p + q);
    }
    return c / (3.0 * a);
}

inline Polygon2 counter_clockwise(Polygon2 poly) {
    if (signed_area(poly) < 0.0)
        std::reverse(poly.begin(), poly.end());
    return poly;
}

namespace detail {

inline int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    double v = cross2(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

} // namespace detail

inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    using detail::orient;
    int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4)
        return true;
    return (o1 == 0 && detail::on_segment(a, b, c)) || (o2 == 0 && detail::on_segment(a, b, d)) ||
           (o3 == 0 && detail::on_segment(c, d, a)) || (o4 == 0 && detail::on_segment(c, d, b));
}

/// At least three vertices, non-zero area, and no two non-adjacent edges touch.
inline bool is_simple(const Polygon2& poly) {
    const std::size_t n = poly.size();
    if (n < 3 || std::abs(signed_area(poly)) < 1e-12)
        return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent)
                continue;
            if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

/// Even-odd point containment.
inline bool contains(const Polygon2& poly, const Vec2& p) {
    bool inside = false;
    for (std::size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x)
                inside = !inside;
        }
    }
    return inside;
}

/// Parameter intervals [t0, t1] of the line origin + t*dir lying inside the
/// polygon, sorted by t.
inline std::vector<std::pair<double, double>> clip_line(const Polygon2& poly, const Vec2& origin,
                                                        const Vec2& dir) {
    const Vec2 normal(-dir.y(), dir.x());
    std::vector<double> ts;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        double sa = normal.dot(a - origin);
        double sb = normal.dot(b - origin);
        // half-open rule so a line through a vertex counts it once
        if ((sa > 0.0) == (sb > 0.0))
            continue;
        Vec2 hit = a + (b - a) * (sa / (sa - sb));
        ts.push_back(dir.dot(hit - origin) / dir.squaredNorm());
    }
    std::sort(ts.begin(), ts.end());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i + 1 < ts.size(); i += 2)
        if (ts[i + 1] - ts[i] > 1e-12)
            out.emplace_back(ts[i], ts[i + 1]);
    return out;
}

/// Mitered inward offset of a simple polygon by `distance`. Returns nullopt
/// when the offset collapses: an edge reverses or vanishes, the area
/// disappears, or the result self-intersects.
inline std::optional<Polygon2> inset_polygon(const Polygon2& input, double distance) {
    const Polygon2 poly = counter_clockwise(input);
    const std::size_t n = poly.size();
    if (n < 3)
        return std::nullopt;

    std::vector<Vec2> dirs(n), normals(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 e = poly[(i + 1) % n] - poly[i];
        double len = e.norm();
        if (len < 1e-12)
            return std::nullopt;
        dirs[i] = e / len;
        normals[i] = Vec2(-dirs[i].y(), dirs[i].x());
    }

    Polygon2 out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t prev = (i + n - 1) % n;
        Vec2 p1 = poly[prev] + distance * normals[prev];
        Vec2 p2 = poly[i] + distance * normals[i];
        double denom = cross2(dirs[prev], dirs[i]);
        if (std::abs(denom) < 1e-12) {
            out[i] = p2;
        } else {
            double t = cross2(p2 - p1, dirs[i]) / denom;
            out[i] = p1 + t * dirs[prev];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        Vec2 e = out[(i + 1) % n] - out[i];
        if (e.norm() < 1e-9 || e.dot(dirs[i]) <= 0.0)
            return std::nullopt;
    }
    if (signed_area(out) < 1e-12 || !is_simple(out))
        return std::nullopt;
    return out;
}

inline double polygon_perimeter(const Polygon2& poly) {
    double len = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i)
        len += (poly[(i + 1) % n] - poly[i]).norm();
    return len;
}

} // namespace open5x

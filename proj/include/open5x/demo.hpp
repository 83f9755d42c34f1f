#pragma once

#include "open5x/geometry.hpp"
#include "open5x/toolpath.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

// Built-in demo substrates.
namespace open5x::demo {

using Facets = std::vector<std::array<Vec3, 3>>;

/// 40 x 40 mm plate top at z = 2, as an 8 x 8 quad grid facing +Z.
inline Facets flat_plate() {
    Facets out;
    constexpr int n = 8;
    constexpr double size = 40.0, z = 2.0;
    auto at = [&](int i, int j) { return Vec3(-size / 2 + size * i / n, -size / 2 + size * j / n, z); };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            out.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return out;
}

inline constexpr double kHemisphereRadius = 20.0;

/// Upper hemisphere of radius 20 centred on the origin, 64 rings by 64
/// sectors, facing outward.
inline Facets hemisphere() {
    Facets out;
    constexpr int rings = 64, sectors = 64;
    const double r = kHemisphereRadius;
    auto at = [&](int ring, int sector) {
        double theta = 0.5 * std::numbers::pi * ring / rings; // from the pole
        double phi = 2.0 * std::numbers::pi * sector / sectors;
        if (ring == 0)
            return Vec3(0.0, 0.0, r);
        return Vec3(r * std::sin(theta) * std::cos(phi), r * std::sin(theta) * std::sin(phi), r * std::cos(theta));
    };
    for (int i = 0; i < rings; ++i)
        for (int j = 0; j < sectors; ++j) {
            Vec3 a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            if (i > 0)
                out.push_back({a, b, d});
            out.push_back({d, b, c});
        }
    return out;
}

inline Polygon2 rectangle(double x0, double y0, double x1, double y1) {
    return {Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)};
}

/// Hemisphere patch on one flank, clear of the pole.
inline Polygon2 hemisphere_region() { return rectangle(5.0, -4.0, 13.0, 4.0); }

inline Polygon2 flat_plate_region() { return rectangle(-10.0, -10.0, 10.0, 10.0); }

/// Region text in the `--region` form: "x,y x,y ...".
inline std::string region_text(const Polygon2& poly) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < poly.size(); ++i)
        s << (i ? " " : "") << poly[i].x() << ',' << poly[i].y();
    return s.str();
}

/// Two short paths across the hemisphere flank in point-and-normal form.
inline std::string sample_cls() {
    std::ostringstream s;
    s.precision(10);
    s << "# demo toolpath: x y z i j k\n";
    const double r = kHemisphereRadius + 0.1;
    for (int path = 0; path < 2; ++path) {
        if (path)
            s << '\n';
        // equal arc steps along the circle of latitude y, x from 6 to 14
        double y = path == 0 ? -1.0 : 1.0;
        double rho = std::sqrt(r * r - y * y);
        double a0 = std::asin(6.0 / rho), a1 = std::asin(14.0 / rho);
        int steps = static_cast<int>(std::ceil(rho * (a1 - a0) / 0.19));
        for (int k = 0; k <= steps; ++k) {
            double a = a0 + (a1 - a0) * k / steps;
            double x = rho * std::sin(a), z = rho * std::cos(a);
            Vec3 n = Vec3(x, y, z) / r;
            s << x << ' ' << y << ' ' << z << ' ' << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
        }
    }
    return s.str();
}

} // namespace open5x::demo

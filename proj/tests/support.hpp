#pragma once

#include "open5x/open5x.hpp"

#include <numbers>
#include <random>

namespace testing_support {

using namespace open5x;

inline SurfaceMesh flat_square(double half, double z, int n = 4) {
    demo::Facets f;
    auto at = [&](int i, int j) { return Vec3(-half + 2 * half * i / n, -half + 2 * half * j / n, z); };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            f.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            f.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return SurfaceMesh::from_facets(f);
}

inline SurfaceMesh scaled_hemisphere(double radius) {
    demo::Facets f = demo::hemisphere();
    for (auto& tri : f)
        for (auto& v : tri)
            v *= radius / demo::kHemisphereRadius;
    return SurfaceMesh::from_facets(f);
}

inline SurfaceMesh hemisphere_mesh() { return SurfaceMesh::from_facets(demo::hemisphere()); }
inline SurfaceMesh flat_plate_mesh() { return SurfaceMesh::from_facets(demo::flat_plate()); }

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vec3 v;
    do
        v = Vec3(g(rng), g(rng), g(rng));
    while (v.norm() < 1e-6);
    return v.normalized();
}

inline SliceParams square_params(double half) {
    SliceParams p;
    p.region = demo::rectangle(-half, -half, half, half);
    return p;
}

// Convex minimization by ternary search, used as an independent oracle.
template <class Fn>
double ternary_min(double lo, double hi, Fn&& f, int iterations = 90) {
    for (int k = 0; k < iterations; ++k) {
        double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
        if (f(a) <= f(b))
            hi = b;
        else
            lo = a;
    }
    return f(0.5 * (lo + hi));
}

// Smallest point-to-frustum distance over a disc. The distance to a convex
// solid is convex, so nested ternary searches find the minimum.
inline double brute_clearance(const Frustum& f, const Disc& d) {
    Vec3 e1 = d.normal.unitOrthogonal(), e2 = d.normal.cross(e1);
    return ternary_min(-d.radius, d.radius, [&](double s) {
        double w = std::sqrt(std::max(0.0, d.radius * d.radius - s * s));
        return ternary_min(-w, w, [&](double t) { return distance(f, d.center + s * e1 + t * e2); });
    });
}

inline double brute_clearance(const Frustum& f, const Triangle3& tri) {
    return ternary_min(0.0, 1.0, [&](double s) {
        return ternary_min(0.0, 1.0 - s, [&](double t) { return distance(f, tri.a + s * (tri.b - tri.a) + t * (tri.c - tri.a)); });
    });
}

struct CollisionSample {
    Frustum frustum;
    Disc bed;
};

// Random nozzle poses above the default bed, tip 0.6 to 20 mm up, tilt 0 to
// 90 degrees, some of them beyond the bed edge.
inline std::vector<CollisionSample> collision_samples(std::size_t count, std::uint64_t seed) {
    MachineConfig c;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tilt(0.0, 90.0), spin(-180.0, 180.0), height(0.6, 20.0), radius(0.0, 40.0),
        angle(0.0, 2.0 * std::numbers::pi);
    const Disc bed{Vec3(c.pivot.x(), c.pivot.y(), c.bed_surface_z), Vec3::UnitZ(), 0.5 * c.bed_diameter};
    std::vector<CollisionSample> out;
    for (std::size_t k = 0; k < count; ++k) {
        double r = radius(rng), a = angle(rng);
        Vec3 tip = bed.center + Vec3(r * std::cos(a), r * std::sin(a), height(rng));
        Mat3 rot = bed_rotation(tilt(rng), spin(rng));
        out.push_back({Frustum::from(nozzle_model(c), tip, rot.transpose() * Vec3::UnitZ()), bed});
    }
    return out;
}

} // namespace testing_support

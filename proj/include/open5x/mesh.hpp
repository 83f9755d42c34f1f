#pragma once

#include "open5x/error.hpp"
#include "open5x/geometry.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace open5x {

struct SurfacePoint {
    Vec3 position;
    Vec3 normal;
    std::size_t triangle = 0;
};

struct RayHit {
    std::size_t triangle;
    double t;
    double b1, b2; // barycentric weights of vertices 1 and 2
};

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    Vec3 center() const { return 0.5 * (lo + hi); }
    double half_diagonal() const { return 0.5 * (hi - lo).norm(); }

    bool hit_by_ray(const Vec3& origin, const Vec3& dir) const {
        double tmin = 0.0;
        double tmax = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            // padded so the box never rejects a ray the triangle test accepts
            double pad = 1e-9 * (1.0 + std::abs(lo[a]) + std::abs(hi[a]));
            double l = lo[a] - pad, h = hi[a] + pad;
            if (std::abs(dir[a]) < 1e-300) {
                if (origin[a] < l || origin[a] > h)
                    return false;
                continue;
            }
            double t0 = (l - origin[a]) / dir[a];
            double t1 = (h - origin[a]) / dir[a];
            if (t0 > t1)
                std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
            if (tmax < tmin)
                return false;
        }
        return true;
    }
};

/// Moller-Trumbore, edges inclusive, hits with t >= 0 only.
inline std::optional<RayHit> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                                const Vec3& b, const Vec3& c, std::size_t id) {
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-18)
        return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 s = origin - a;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0)
        return std::nullopt;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0)
        return std::nullopt;
    const double t = e2.dot(q) * inv;
    if (t < 0.0)
        return std::nullopt;
    return RayHit{id, t, u, v};
}

/// Triangulated substrate surface. Immutable once built; all queries are
/// const and safe to share between threads.
class SurfaceMesh {
public:
    using Triangle = std::array<std::uint32_t, 3>;

    static constexpr double kWeldTolerance = 1e-6;
    static constexpr double kDegenerateArea = 1e-12;

    /// Welds vertices within kWeldTolerance, drops degenerate facets, and
    /// computes area-weighted vertex normals. `facet_normals` may be empty or
    /// hold one entry per facet; a non-zero entry fixes the facet orientation.
    static SurfaceMesh from_facets(std::span<const std::array<Vec3, 3>> facets,
                                   std::span<const Vec3> facet_normals = {}) {
        SurfaceMesh mesh;
        Welder welder(mesh.vertices_);
        for (std::size_t f = 0; f < facets.size(); ++f) {
            std::array<Vec3, 3> corners = facets[f];
            Vec3 n = (corners[1] - corners[0]).cross(corners[2] - corners[0]);
            if (0.5 * n.norm() < kDegenerateArea) {
                ++mesh.dropped_;
                continue;
            }
            if (f < facet_normals.size() && facet_normals[f].squaredNorm() > 0.0 &&
                facet_normals[f].dot(n) < 0.0)
                std::swap(corners[1], corners[2]);
            Triangle tri{welder.index(corners[0]), welder.index(corners[1]), welder.index(corners[2])};
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                ++mesh.dropped_;
                continue;
            }
            mesh.triangles_.push_back(tri);
        }
        if (mesh.triangles_.empty())
            throw Error(ErrorCode::EmptyMesh, "mesh", "surface has no usable triangles");
        mesh.compute_normals();
        mesh.build_index();
        return mesh;
    }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<Vec3>& vertex_normals() const { return normals_; }
    std::size_t dropped_degenerate() const { return dropped_; }
    const Aabb& bounds() const { return nodes_.front().box; }

    Vec3 corner(std::size_t tri, int k) const { return vertices_[triangles_[tri][k]]; }

    Vec3 facet_normal(std::size_t tri) const {
        return (corner(tri, 1) - corner(tri, 0)).cross(corner(tri, 2) - corner(tri, 0)).normalized();
    }

    Vec3 interpolated_normal(std::size_t tri, double b1, double b2) const {
        const Triangle& t = triangles_[tri];
        Vec3 n = (1.0 - b1 - b2) * normals_[t[0]] + b1 * normals_[t[1]] + b2 * normals_[t[2]];
        double len = n.norm();
        return len > 1e-300 ? Vec3(n / len) : facet_normal(tri);
    }

    /// Every triangle the ray crosses, found through the spatial index.
    std::vector<RayHit> ray_hits(const Vec3& origin, const Vec3& dir) const {
        std::vector<RayHit> hits;
        std::vector<std::uint32_t> stack{0};
        while (!stack.empty()) {
            const Node& node = nodes_[stack.back()];
            stack.pop_back();
            if (!node.box.hit_by_ray(origin, dir))
                continue;
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                    std::size_t tri = order_[i];
                    if (auto h = intersect_triangle(origin, dir, corner(tri, 0), corner(tri, 1),
                                                    corner(tri, 2), tri))
                        hits.push_back(*h);
                }
            } else {
                stack.push_back(node.left);
                stack.push_back(node.right);
            }
        }
        std::sort(hits.begin(), hits.end(),
                  [](const RayHit& a, const RayHit& b) { return a.triangle < b.triangle; });
        return hits;
    }

    /// Best-first traversal for distance-like queries. `lower_bound(box)`
    /// must never exceed the value `evaluate(triangle)` returns for any
    /// triangle inside the box. Returns the minimum found, or `cap` if nothing
    /// beats it.
    template <class LowerBound, class Evaluate>
    double minimize(LowerBound&& lower_bound, Evaluate&& evaluate,
                    double cap = std::numeric_limits<double>::infinity()) const {
        using Entry = std::pair<double, std::uint32_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
        double best = cap;
        open.emplace(lower_bound(nodes_.front().box), 0);
        while (!open.empty()) {
            auto [bound, id] = open.top();
            open.pop();
            if (bound >= best)
                break;
            const Node& node = nodes_[id];
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
                    best = std::min(best, evaluate(static_cast<std::size_t>(order_[i])));
            } else {
                for (std::uint32_t child : {node.left, node.right}) {
                    double b = lower_bound(nodes_[child].box);
                    if (b < best)
                        open.emplace(b, child);
                }
            }
        }
        return best;
    }

private:
    struct Node {
        Aabb box;
        std::uint32_t left = 0, right = 0;
        std::uint32_t first = 0, count = 0;
    };

    class Welder {
    public:
        explicit Welder(std::vector<Vec3>& out) : out_(out) {}

        std::uint32_t index(const Vec3& p) {
            const Key k = key(p);
            for (std::int64_t dx = -1; dx <= 1; ++dx)
                for (std::int64_t dy = -1; dy <= 1; ++dy)
                    for (std::int64_t dz = -1; dz <= 1; ++dz) {
                        auto it = cells_.find(Key{k.x + dx, k.y + dy, k.z + dz});
                        if (it == cells_.end())
                            continue;
                        for (std::uint32_t id : it->second)
                            if ((out_[id] - p).norm() <= kWeldTolerance)
                                return id;
                    }
            auto id = static_cast<std::uint32_t>(out_.size());
            out_.push_back(p);
            cells_[k].push_back(id);
            return id;
        }

    private:
        struct Key {
            std::int64_t x, y, z;
            bool operator==(const Key&) const = default;
        };
        struct KeyHash {
            std::size_t operator()(const Key& k) const {
                std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
                h ^= static_cast<std::uint64_t>(k.y) + 0x7F4A7C159E3779B9ull + (h << 6) + (h >> 2);
                h ^= static_cast<std::uint64_t>(k.z) + 0x94D049BB133111EBull + (h << 6) + (h >> 2);
                return static_cast<std::size_t>(h);
            }
        };
        static Key key(const Vec3& p) {
            return Key{static_cast<std::int64_t>(std::floor(p.x() / kWeldTolerance)),
                       static_cast<std::int64_t>(std::floor(p.y() / kWeldTolerance)),
                       static_cast<std::int64_t>(std::floor(p.z() / kWeldTolerance))};
        }

        std::vector<Vec3>& out_;
        std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;
    };

    void compute_normals() {
        normals_.assign(vertices_.size(), Vec3::Zero());
        for (const Triangle& t : triangles_) {
            // cross product length is twice the area: area weighting for free
            Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
            for (auto v : t)
                normals_[v] += n;
        }
        for (std::size_t i = 0; i < normals_.size(); ++i) {
            double len = normals_[i].norm();
            // opposing facets can cancel exactly; any unit vector keeps the invariant
            normals_[i] = len > 1e-300 ? Vec3(normals_[i] / len) : Vec3::UnitZ();
        }
    }

    void build_index() {
        order_.resize(triangles_.size());
        std::vector<Aabb> boxes(triangles_.size());
        std::vector<Vec3> centers(triangles_.size());
        for (std::size_t i = 0; i < triangles_.size(); ++i) {
            order_[i] = static_cast<std::uint32_t>(i);
            for (int k = 0; k < 3; ++k)
                boxes[i].extend(corner(i, k));
            centers[i] = boxes[i].center();
        }
        nodes_.clear();
        nodes_.reserve(2 * triangles_.size());
        build_node(0, static_cast<std::uint32_t>(order_.size()), boxes, centers);
    }

    std::uint32_t build_node(std::uint32_t first, std::uint32_t last, const std::vector<Aabb>& boxes,
                             const std::vector<Vec3>& centers) {
        constexpr std::uint32_t kLeafSize = 4;
        auto id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        Aabb box, centroid_box;
        for (std::uint32_t i = first; i < last; ++i) {
            box.extend(boxes[order_[i]]);
            centroid_box.extend(centers[order_[i]]);
        }
        nodes_[id].box = box;
        if (last - first <= kLeafSize) {
            nodes_[id].first = first;
            nodes_[id].count = last - first;
            return id;
        }
        Vec3 extent = centroid_box.hi - centroid_box.lo;
        int axis = 0;
        extent.maxCoeff(&axis);
        std::uint32_t mid = first + (last - first) / 2;
        std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last,
                         [&](std::uint32_t a, std::uint32_t b) { return centers[a][axis] < centers[b][axis]; });
        std::uint32_t left = build_node(first, mid, boxes, centers);
        std::uint32_t right = build_node(mid, last, boxes, centers);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Vec3> normals_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::size_t dropped_ = 0;
};

namespace detail {

inline bool looks_binary_stl(std::string_view bytes) {
    if (bytes.size() < 84)
        return false;
    std::uint32_t count;
    std::memcpy(&count, bytes.data() + 80, 4);
    if constexpr (std::endian::native == std::endian::big)
        count = __builtin_bswap32(count);
    return 84ull + 50ull * count == bytes.size();
}

inline float read_f32(const char* p) {
    std::uint32_t bits;
    std::memcpy(&bits, p, 4);
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap32(bits);
    return std::bit_cast<float>(bits);
}

inline SurfaceMesh load_binary_stl(std::string_view bytes) {
    if (bytes.size() < 84)
        throw Error(ErrorCode::MalformedStl, "mesh", "binary STL shorter than its 84-byte header");
    std::uint32_t count;
    std::memcpy(&count, bytes.data() + 80, 4);
    if constexpr (std::endian::native == std::endian::big)
        count = __builtin_bswap32(count);
    if (count == 0)
        throw Error(ErrorCode::EmptyMesh, "mesh", "STL declares zero triangles");
    if (bytes.size() < 84ull + 50ull * count)
        throw Error(ErrorCode::MalformedStl, "mesh",
                    "binary STL truncated: header declares " + std::to_string(count) + " facets");
    std::vector<std::array<Vec3, 3>> facets(count);
    std::vector<Vec3> normals(count);
    for (std::uint32_t f = 0; f < count; ++f) {
        const char* p = bytes.data() + 84 + 50ull * f;
        normals[f] = Vec3(read_f32(p), read_f32(p + 4), read_f32(p + 8));
        for (int k = 0; k < 3; ++k) {
            const char* v = p + 12 + 12 * k;
            facets[f][k] = Vec3(read_f32(v), read_f32(v + 4), read_f32(v + 8));
        }
    }
    return SurfaceMesh::from_facets(facets, normals);
}

inline SurfaceMesh load_ascii_stl(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string tok;
    auto number = [&](const char* what) {
        std::string s;
        if (!(in >> s))
            throw Error(ErrorCode::MalformedStl, "mesh", std::string("ASCII STL ended inside ") + what);
        double v;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw Error(ErrorCode::MalformedStl, "mesh", "bad number '" + s + "' in " + what);
        return v;
    };

    in >> tok; // "solid"
    std::vector<std::array<Vec3, 3>> facets;
    std::vector<Vec3> normals;
    std::vector<Vec3> corners;
    bool in_facet = false;
    bool saw_end = false;
    while (in >> tok) {
        if (tok == "facet") {
            if (in_facet)
                throw Error(ErrorCode::MalformedStl, "mesh", "nested facet in ASCII STL");
            in >> tok;
            if (tok != "normal")
                throw Error(ErrorCode::MalformedStl, "mesh", "expected 'normal' after 'facet'");
            double x = number("facet normal"), y = number("facet normal"), z = number("facet normal");
            normals.emplace_back(x, y, z);
            corners.clear();
            in_facet = true;
        } else if (tok == "vertex") {
            if (!in_facet)
                throw Error(ErrorCode::MalformedStl, "mesh", "vertex outside facet");
            double x = number("vertex"), y = number("vertex"), z = number("vertex");
            corners.emplace_back(x, y, z);
        } else if (tok == "endfacet") {
            if (!in_facet || corners.size() != 3)
                throw Error(ErrorCode::MalformedStl, "mesh", "facet without exactly three vertices");
            facets.push_back({corners[0], corners[1], corners[2]});
            in_facet = false;
        } else if (tok == "endsolid") {
            saw_end = true;
            break;
        }
        // "outer", "loop", "endloop" carry no data
    }
    if (in_facet || !saw_end)
        throw Error(ErrorCode::MalformedStl, "mesh", "ASCII STL truncated (no endsolid)");
    if (facets.empty())
        throw Error(ErrorCode::EmptyMesh, "mesh", "STL contains zero triangles");
    return SurfaceMesh::from_facets(facets, normals);
}

} // namespace detail

/// Binary is recognised by its size matching the declared facet count;
/// otherwise content starting with "solid" is read as ASCII.
inline SurfaceMesh load_stl(std::string_view bytes) {
    if (detail::looks_binary_stl(bytes))
        return detail::load_binary_stl(bytes);
    std::size_t start = 0;
    while (start < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[start])))
        ++start;
    if (bytes.substr(start, 5) == "solid")
        return detail::load_ascii_stl(bytes.substr(start));
    return detail::load_binary_stl(bytes);
}

inline std::string write_binary_stl(std::span<const std::array<Vec3, 3>> facets) {
    std::string out(84 + 50 * facets.size(), '\0');
    std::memcpy(out.data(), "open5x binary STL", 17);
    auto put_u32 = [&](std::size_t off, std::uint32_t v) {
        if constexpr (std::endian::native == std::endian::big)
            v = __builtin_bswap32(v);
        std::memcpy(out.data() + off, &v, 4);
    };
    auto put_f32 = [&](std::size_t off, double v) { put_u32(off, std::bit_cast<std::uint32_t>(static_cast<float>(v))); };
    put_u32(80, static_cast<std::uint32_t>(facets.size()));
    for (std::size_t f = 0; f < facets.size(); ++f) {
        std::size_t base = 84 + 50 * f;
        const auto& c = facets[f];
        Vec3 n = (c[1] - c[0]).cross(c[2] - c[0]);
        if (n.norm() > 0.0)
            n.normalize();
        for (int a = 0; a < 3; ++a)
            put_f32(base + 4 * a, n[a]);
        for (int k = 0; k < 3; ++k)
            for (int a = 0; a < 3; ++a)
                put_f32(base + 12 + 12 * k + 4 * a, c[k][a]);
    }
    return out;
}

/// Highest crossing of the downward vertical ray through `xy`.
inline std::optional<SurfacePoint> project_down(const SurfaceMesh& mesh, const Vec2& xy) {
    const double top = mesh.bounds().hi.z() + 1.0;
    const Vec3 origin(xy.x(), xy.y(), top);
    const Vec3 dir(0.0, 0.0, -1.0);
    auto hits = mesh.ray_hits(origin, dir);
    if (hits.empty())
        return std::nullopt;
    const RayHit* best = &hits.front();
    for (const RayHit& h : hits)
        if (h.t < best->t)
            best = &h;
    return SurfacePoint{origin + best->t * dir, mesh.interpolated_normal(best->triangle, best->b1, best->b2),
                        best->triangle};
}

inline Vec3 offset_point(const SurfacePoint& p, double distance) { return p.position + distance * p.normal; }

} // namespace open5x

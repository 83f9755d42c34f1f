#pragma once

#include "open5x/error.hpp"
#include "open5x/geometry.hpp"
#include "open5x/mesh.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace open5x {

struct SliceParams {
    double nozzle_diameter = 0.4; // mm
    double layer_height = 0.2;    // mm
    int layer_count = 1;
    double travel_height = 2.0; // mm
    double infill_angle = 0.0;  // degrees
    double infill_spacing = 1.0; // mm
    int perimeter_count = 1;
    double segment_length = 0.2; // mm
    Polygon2 region;             // XY patch to print
};

struct FieldError {
    std::string field;
    std::string message;
};

inline std::vector<FieldError> validate(const SliceParams& p) {
    std::vector<FieldError> errors;
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(p.nozzle_diameter) || p.nozzle_diameter <= 0.0)
        errors.push_back({"nozzle_diameter", "must be > 0"});
    if (!finite(p.layer_height) || p.layer_height <= 0.0)
        errors.push_back({"layer_height", "must be > 0"});
    if (p.layer_count < 1)
        errors.push_back({"layer_count", "must be >= 1"});
    if (!finite(p.travel_height) || p.travel_height < 0.0)
        errors.push_back({"travel_height", "must be >= 0"});
    if (!finite(p.infill_angle))
        errors.push_back({"infill_angle", "must be finite"});
    if (!finite(p.infill_spacing) || p.infill_spacing < p.nozzle_diameter)
        errors.push_back({"infill_spacing", "must be >= nozzle_diameter"});
    if (p.perimeter_count < 0)
        errors.push_back({"perimeter_count", "must be >= 0"});
    if (!finite(p.segment_length) || p.segment_length <= 0.0)
        errors.push_back({"segment_length", "must be > 0"});
    if (!is_simple(p.region))
        errors.push_back({"region", "must be a simple polygon with at least three vertices"});
    return errors;
}

inline void require_valid(const SliceParams& p) {
    auto errors = validate(p);
    if (errors.empty())
        return;
    std::string msg;
    for (const auto& e : errors)
        msg += (msg.empty() ? "" : "; ") + e.field + " " + e.message;
    throw Error(ErrorCode::InvalidParams, "toolpath", msg);
}

/// A toolpath sample: already offset off the substrate, with its unit normal.
struct PathSample {
    Vec3 position;
    Vec3 normal;
};

struct Extrude {
    std::vector<PathSample> samples;
};

struct Travel {
    PathSample from;
    PathSample to;
    double lift = 0.0; // mm along the endpoint normals

    Vec3 lifted_from() const { return from.position + lift * from.normal; }
    Vec3 lifted_to() const { return to.position + lift * to.normal; }
};

struct Retract {
    double length = 0.0;
};

struct Unretract {
    double length = 0.0;
};

using Move = std::variant<Extrude, Travel, Retract, Unretract>;

struct Toolpath {
    std::vector<Move> moves;
    std::vector<std::string> warnings;
};

/// Breaches of the toolpath invariants; empty when the toolpath is sound.
inline std::vector<std::string> check_invariants(const Toolpath& tp, double segment_length) {
    std::vector<std::string> problems;
    bool primed = false;  // an Unretract since the last Retract
    bool pending = false; // an Extrude not yet closed by a Retract
    long balance = 0;
    for (std::size_t i = 0; i < tp.moves.size(); ++i) {
        const Move& m = tp.moves[i];
        const std::string where = "move " + std::to_string(i) + ": ";
        if (auto* e = std::get_if<Extrude>(&m)) {
            if (!primed)
                problems.push_back(where + "extrude without preceding unretract");
            for (std::size_t k = 0; k < e->samples.size(); ++k) {
                if (std::abs(e->samples[k].normal.norm() - 1.0) > 1e-9)
                    problems.push_back(where + "non-unit normal");
                if (k > 0 && (e->samples[k].position - e->samples[k - 1].position).norm() > segment_length + 1e-9)
                    problems.push_back(where + "sample spacing exceeds segment length");
            }
            pending = true;
        } else if (std::holds_alternative<Travel>(m)) {
            if (pending)
                problems.push_back(where + "travel before retract");
        } else if (std::holds_alternative<Retract>(m)) {
            if (--balance != 0)
                problems.push_back(where + "unbalanced retract");
            primed = false;
            pending = false;
        } else {
            if (++balance != 1)
                problems.push_back(where + "unbalanced unretract");
            primed = true;
        }
    }
    if (balance != 0)
        problems.push_back("retract/unretract counts differ");
    return problems;
}

namespace detail {

inline SurfacePoint project_or_throw(const SurfaceMesh& mesh, const Vec2& xy) {
    auto hit = project_down(mesh, xy);
    if (!hit)
        throw Error(ErrorCode::RegionOffSurface, "toolpath",
                    "point (" + std::to_string(xy.x()) + ", " + std::to_string(xy.y()) +
                        ") does not project onto the substrate");
    return *hit;
}

inline PathSample drape_point(const SurfaceMesh& mesh, const Vec2& xy, double offset) {
    SurfacePoint sp = project_or_throw(mesh, xy);
    return {offset_point(sp, offset), sp.normal};
}

inline void refine(const SurfaceMesh& mesh, const Vec2& a, const PathSample& sa, const Vec2& b,
                   const PathSample& sb, double offset, double seg, int depth, std::vector<PathSample>& out) {
    if ((sb.position - sa.position).norm() <= seg + 1e-10 || depth > 40) {
        out.push_back(sb);
        return;
    }
    Vec2 m = 0.5 * (a + b);
    PathSample sm = drape_point(mesh, m, offset);
    refine(mesh, a, sa, m, sm, offset, seg, depth + 1, out);
    refine(mesh, m, sm, b, sb, offset, seg, depth + 1, out);
}

} // namespace detail

/// Drapes the planar segment a->b onto the substrate at `offset` along the
/// normals. Samples are near-uniform in 3D and no consecutive pair is further
/// than `seg` apart. The first sample is at `a`, the last at `b`.
inline std::vector<PathSample> drape_segment(const SurfaceMesh& mesh, const Vec2& a, const Vec2& b, double offset,
                                             double seg) {
    const double planar = (b - a).norm();
    int coarse = std::max(1, static_cast<int>(std::ceil(planar / seg - 1e-9)));
    std::vector<PathSample> probe;
    probe.reserve(coarse + 1);
    for (int i = 0; i <= coarse; ++i)
        probe.push_back(detail::drape_point(mesh, a + (b - a) * (double(i) / coarse), offset));
    double spatial = 0.0;
    for (int i = 1; i <= coarse; ++i)
        spatial += (probe[i].position - probe[i - 1].position).norm();

    int count = std::max(1, static_cast<int>(std::ceil(spatial / seg - 1e-9)));
    std::vector<PathSample> out;
    out.reserve(count + 1);
    Vec2 prev_xy = a;
    PathSample prev = probe.front();
    out.push_back(prev);
    for (int i = 1; i <= count; ++i) {
        Vec2 xy = a + (b - a) * (double(i) / count);
        PathSample s = i == count ? probe.back() : detail::drape_point(mesh, xy, offset);
        detail::refine(mesh, prev_xy, prev, xy, s, offset, seg, 0, out);
        prev_xy = xy;
        prev = s;
    }
    return out;
}

/// Distance of layer `layer_index` off the substrate along the normals.
inline double layer_offset(const SliceParams& p, int layer_index) {
    return layer_index * p.layer_height + 0.5 * p.layer_height;
}

/// Serpentine hatch over the region, draped onto the substrate. Odd layers
/// are rotated a further 90 degrees.
inline std::vector<Extrude> generate_infill(const SurfaceMesh& mesh, const SliceParams& p, int layer_index) {
    const double angle = deg_to_rad(p.infill_angle + 90.0 * (layer_index % 2));
    const Vec2 dir(std::cos(angle), std::sin(angle));
    const Vec2 across(-dir.y(), dir.x());
    const double offset = layer_offset(p, layer_index);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Vec2& v : p.region) {
        lo = std::min(lo, across.dot(v));
        hi = std::max(hi, across.dot(v));
    }
    const double width = hi - lo;
    const int lines = std::max(1, static_cast<int>(std::ceil(width / p.infill_spacing - 1e-9)));
    const double first = lo + 0.5 * (width - (lines - 1) * p.infill_spacing);

    std::vector<Extrude> out;
    for (int k = 0; k < lines; ++k) {
        const Vec2 origin = (first + k * p.infill_spacing) * across;
        auto spans = clip_line(p.region, origin, dir);
        bool reverse = k % 2 == 1;
        if (reverse)
            std::reverse(spans.begin(), spans.end());
        for (auto [t0, t1] : spans) {
            Vec2 a = origin + t0 * dir, b = origin + t1 * dir;
            if (reverse)
                std::swap(a, b);
            out.push_back(Extrude{drape_segment(mesh, a, b, offset, p.segment_length)});
        }
    }
    return out;
}

struct PerimeterResult {
    std::vector<Extrude> paths;
    std::vector<std::string> warnings;
};

/// Closed loops inset (i + 0.5) nozzle widths from the region edge, outermost
/// first. A collapsed inset ends the sequence with a warning.
inline PerimeterResult generate_perimeters(const SurfaceMesh& mesh, const SliceParams& p, int layer_index) {
    PerimeterResult result;
    const double offset = layer_offset(p, layer_index);
    for (int i = 0; i < p.perimeter_count; ++i) {
        auto loop = inset_polygon(p.region, (i + 0.5) * p.nozzle_diameter);
        if (!loop) {
            result.warnings.push_back("InsetCollapse: layer " + std::to_string(layer_index) + " perimeter " +
                                      std::to_string(i) + " vanished; emitted " + std::to_string(i) + " of " +
                                      std::to_string(p.perimeter_count));
            break;
        }
        Extrude path;
        for (std::size_t v = 0; v < loop->size(); ++v) {
            auto piece = drape_segment(mesh, (*loop)[v], (*loop)[(v + 1) % loop->size()], offset, p.segment_length);
            path.samples.insert(path.samples.end(), piece.begin() + (v == 0 ? 0 : 1), piece.end());
        }
        path.samples.back() = path.samples.front();
        result.paths.push_back(std::move(path));
    }
    return result;
}

/// Orders each group greedily by nearest start point, groups kept in
/// sequence, and links paths with retract / three-leg travel / unretract.
inline Toolpath plan_travels(const std::vector<std::vector<Extrude>>& groups, const SliceParams& p,
                             double retract_length) {
    Toolpath tp;
    std::optional<PathSample> cursor;
    for (const auto& group : groups) {
        std::vector<bool> used(group.size(), false);
        for (std::size_t i = 0; i < group.size(); ++i)
            used[i] = group[i].samples.empty();
        while (true) {
            std::size_t pick = group.size();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < group.size(); ++i) {
                if (used[i])
                    continue;
                if (!cursor) {
                    pick = i;
                    break;
                }
                double d = (group[i].samples.front().position - cursor->position).norm();
                if (d < best) {
                    best = d;
                    pick = i;
                }
            }
            if (pick == group.size())
                break;
            used[pick] = true;
            if (cursor) {
                tp.moves.emplace_back(Retract{retract_length});
                tp.moves.emplace_back(Travel{*cursor, group[pick].samples.front(), p.travel_height});
            }
            tp.moves.emplace_back(Unretract{retract_length});
            tp.moves.emplace_back(group[pick]);
            cursor = group[pick].samples.back();
        }
    }
    if (cursor)
        tp.moves.emplace_back(Retract{retract_length});
    return tp;
}

inline Toolpath plan_travels(const std::vector<Extrude>& paths, const SliceParams& p, double retract_length) {
    return plan_travels(std::vector<std::vector<Extrude>>{paths}, p, retract_length);
}

/// Samples every travel leg at 0.1 mm and reports legs dipping below the
/// substrate surface. Advisory only.
inline std::vector<std::string> travel_clearance_warnings(const SurfaceMesh& mesh, const Toolpath& tp) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tp.moves.size(); ++i) {
        const auto* t = std::get_if<Travel>(&tp.moves[i]);
        if (t == nullptr)
            continue;
        const Vec3 legs[4] = {t->from.position, t->lifted_from(), t->lifted_to(), t->to.position};
        double worst = std::numeric_limits<double>::infinity();
        for (int l = 0; l < 3; ++l) {
            double len = (legs[l + 1] - legs[l]).norm();
            int steps = std::max(1, static_cast<int>(std::ceil(len / 0.1)));
            for (int s = 0; s <= steps; ++s) {
                Vec3 q = legs[l] + (legs[l + 1] - legs[l]) * (double(s) / steps);
                if (auto hit = project_down(mesh, q.head<2>()))
                    worst = std::min(worst, q.z() - hit->position.z());
            }
        }
        if (worst < -1e-9)
            out.push_back("travel " + std::to_string(i) + " dips " + std::to_string(-worst) +
                          " mm below the substrate; raise travel_height");
    }
    return out;
}

/// Perimeters then infill for each layer, bottom-up, linked by travels.
inline Toolpath slice(const SurfaceMesh& mesh, const SliceParams& params, double retract_length) {
    require_valid(params);
    SliceParams p = params;
    p.region = counter_clockwise(p.region);

    std::vector<std::vector<Extrude>> groups;
    std::vector<std::string> warnings;
    for (int layer = 0; layer < p.layer_count; ++layer) {
        if (p.perimeter_count > 0) {
            auto perimeters = generate_perimeters(mesh, p, layer);
            warnings.insert(warnings.end(), perimeters.warnings.begin(), perimeters.warnings.end());
            groups.push_back(std::move(perimeters.paths));
        }
        groups.push_back(generate_infill(mesh, p, layer));
    }
    Toolpath tp = plan_travels(groups, p, retract_length);
    for (auto& w : travel_clearance_warnings(mesh, tp))
        warnings.push_back(std::move(w));
    tp.warnings = std::move(warnings);
    return tp;
}

} // namespace open5x

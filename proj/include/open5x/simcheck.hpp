#pragma once

#include "open5x/collision.hpp"
#include "open5x/config.hpp"
#include "open5x/mesh.hpp"
#include "open5x/program.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace open5x {

inline constexpr std::string_view kTraceHeader = "open5x-trace v1";

struct Frame {
    std::size_t index = 0;
    double time = 0.0; // s
    MachinePose pose;
    MoveKind kind = MoveKind::Travel;
    std::array<double, 6> axis_speeds{};
    Mat3 bed_rotation = Mat3::Identity(); // part to machine: R p + t
    Vec3 bed_translation = Vec3::Zero();
    bool collision_bed = false;
    bool collision_substrate = false;
    bool axis_violation = false;
    std::optional<std::string> offending_axis;
    double min_clearance = 0.0;
    double bed_clearance = 0.0;
    std::optional<double> substrate_clearance;
    std::string detail;

    bool flagged() const { return collision_bed || collision_substrate || axis_violation; }

    bool operator==(const Frame& o) const {
        return index == o.index && time == o.time && pose == o.pose && kind == o.kind &&
               axis_speeds == o.axis_speeds && bed_rotation == o.bed_rotation &&
               bed_translation == o.bed_translation && collision_bed == o.collision_bed &&
               collision_substrate == o.collision_substrate && axis_violation == o.axis_violation &&
               offending_axis == o.offending_axis && min_clearance == o.min_clearance &&
               bed_clearance == o.bed_clearance && substrate_clearance == o.substrate_clearance &&
               detail == o.detail;
    }
};

struct SimTrace {
    std::vector<Frame> frames;

    std::size_t flagged_count() const {
        return static_cast<std::size_t>(std::count_if(frames.begin(), frames.end(), [](auto& f) { return f.flagged(); }));
    }
    double total_time() const { return frames.empty() ? 0.0 : frames.back().time; }
};

inline NozzleModel nozzle_model(const MachineConfig& c) {
    return {c.nozzle_tip_radius, c.nozzle_cone_half_angle, c.nozzle_cone_length};
}

/// Clearances of one machine pose, computed in part coordinates.
struct PoseClearance {
    double bed;
    std::optional<double> substrate;
};

inline double substrate_clearance(const SurfaceMesh& mesh, const Frustum& f) {
    double best = std::numeric_limits<double>::infinity();
    auto bound = [&](const Aabb& box) {
        double b = distance(f, box.center()) - box.half_diagonal();
        return b > 0.0 ? b : -std::numeric_limits<double>::infinity();
    };
    auto evaluate = [&](std::size_t tri) {
        Triangle3 t{mesh.corner(tri, 0), mesh.corner(tri, 1), mesh.corner(tri, 2)};
        Vec3 c = (t.a + t.b + t.c) / 3.0;
        double reach = std::max({(t.a - c).norm(), (t.b - c).norm(), (t.c - c).norm()});
        double cheap = distance(f, c) - reach;
        if (cheap > 0.0 && cheap >= best)
            return best;
        best = std::min(best, clearance(f, t));
        return best;
    };
    return mesh.minimize(bound, evaluate);
}

inline PoseClearance pose_clearance(const MachinePose& pose, const MachineConfig& c, const SurfaceMesh* substrate) {
    const PivotGeometry pivot = c.pivot_geometry();
    const Mat3 r = bed_rotation(pose.u, pose.v, pivot);
    const Vec3 tip = pivot.pivot_point + r.transpose() * (Vec3(pose.x, pose.y, pose.z) - pivot.pivot_point);
    const Frustum f = Frustum::from(nozzle_model(c), tip, r.transpose() * Vec3::UnitZ());
    const Disc bed{Vec3(c.pivot.x(), c.pivot.y(), c.bed_surface_z), Vec3::UnitZ(), 0.5 * c.bed_diameter};
    PoseClearance out{clearance(f, bed), std::nullopt};
    if (substrate)
        out.substrate = substrate_clearance(*substrate, f);
    return out;
}

namespace detail {

inline MachinePose midpoint(const MachinePose& a, const MachinePose& b) {
    MachinePose m = b;
    m.x = 0.5 * (a.x + b.x);
    m.y = 0.5 * (a.y + b.y);
    m.z = 0.5 * (a.z + b.z);
    m.u = 0.5 * (a.u + b.u);
    m.v = 0.5 * (a.v + b.v);
    m.e = 0.5 * (a.e + b.e);
    return m;
}

inline std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

} // namespace detail

/// Replays the program in order. Frame 0 is the first pose at t = 0; each
/// later frame closes one segment and covers its midpoint and end. Segments
/// with no axis motion produce no frame.
inline SimTrace replay(const MachineProgram& prog, const MachineConfig& c, const SurfaceMesh* substrate = nullptr,
                       std::optional<double> margin = std::nullopt) {
    const double m = margin.value_or(c.safety_margin);
    const PivotGeometry pivot = c.pivot_geometry();
    SimTrace trace;
    double time = 0.0;
    for (std::size_t i = 0; i < prog.moves.size(); ++i) {
        const MachineMove& move = prog.moves[i];
        Frame fr;
        fr.index = i;
        fr.pose = move.pose;
        fr.kind = move.kind;
        std::vector<std::string> notes;

        PoseClearance cl{0.0, std::nullopt};
        if (i > 0) {
            const MachinePose& prev = prog.moves[i - 1].pose;
            SpeedReport rep = check_axis_speeds(prev, move.pose, move.pose.f, c.limits);
            if (rep.distance == 0.0)
                continue;
            if (!(move.pose.f > 0.0))
                throw Error(ErrorCode::InvalidParams, "simcheck", "move " + std::to_string(i) + " has no feedrate");
            time += 60.0 * rep.duration_min;
            fr.axis_speeds = rep.speeds;
            cl = pose_clearance(move.pose, c, substrate);
            PoseClearance mid = pose_clearance(detail::midpoint(prev, move.pose), c, substrate);
            cl.bed = std::min(cl.bed, mid.bed);
            if (cl.substrate)
                cl.substrate = std::min(*cl.substrate, *mid.substrate);

            double worst = 0.0;
            for (const AxisViolation& v : rep.violations) {
                fr.axis_violation = true;
                notes.push_back(std::string(axis_name(v.axis)) + " speed " + detail::fmt(v.speed) + " exceeds " +
                                detail::fmt(v.limit));
                if (v.speed / v.limit > worst) {
                    worst = v.speed / v.limit;
                    fr.offending_axis = axis_name(v.axis);
                }
            }
        } else {
            cl = pose_clearance(move.pose, c, substrate);
        }
        for (const ProgramViolation& v : range_violations(move.pose, i, c)) {
            fr.axis_violation = true;
            notes.push_back(std::string(axis_name(v.axis)) + " position " + detail::fmt(v.value) + " outside limit " +
                            detail::fmt(v.limit));
            if (!fr.offending_axis)
                fr.offending_axis = axis_name(v.axis);
        }
        fr.time = time;

        fr.bed_clearance = cl.bed;
        fr.substrate_clearance = cl.substrate;
        fr.min_clearance = cl.substrate ? std::min(cl.bed, *cl.substrate) : cl.bed;
        if (cl.bed < m) {
            fr.collision_bed = true;
            notes.push_back("bed clearance " + detail::fmt(cl.bed) + " below margin " + detail::fmt(m));
        }
        if (cl.substrate && *cl.substrate < 0.0) {
            fr.collision_substrate = true;
            notes.push_back("nozzle penetrates substrate by " + detail::fmt(-*cl.substrate));
        }
        for (std::size_t k = 0; k < notes.size(); ++k)
            fr.detail += (k ? "; " : "") + notes[k];

        fr.bed_rotation = bed_rotation(move.pose.u, move.pose.v, pivot);
        fr.bed_translation = pivot.pivot_point - fr.bed_rotation * pivot.pivot_point;
        trace.frames.push_back(std::move(fr));
    }
    return trace;
}

namespace detail {

inline nlohmann::ordered_json to_json(const Frame& f) {
    nlohmann::ordered_json j;
    j["i"] = f.index;
    j["time"] = f.time;
    j["pose"] = {{"x", f.pose.x}, {"y", f.pose.y}, {"z", f.pose.z}, {"u", f.pose.u},
                 {"v", f.pose.v}, {"e", f.pose.e}, {"f", f.pose.f}};
    j["kind"] = to_string(f.kind);
    j["axis_speeds"] = f.axis_speeds;
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            r.push_back(f.bed_rotation(row, col));
    j["bed_world_transform"] = {{"rotation", r},
                                {"translation", {f.bed_translation.x(), f.bed_translation.y(), f.bed_translation.z()}}};
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    if (f.collision_bed)
        flags.push_back("collision_bed");
    if (f.collision_substrate)
        flags.push_back("collision_substrate");
    if (f.axis_violation)
        flags.push_back("axis_violation");
    j["flags"] = flags;
    j["offending_axis"] = f.offending_axis ? nlohmann::ordered_json(*f.offending_axis) : nlohmann::ordered_json(nullptr);
    j["min_clearance"] = f.min_clearance;
    j["bed_clearance"] = f.bed_clearance;
    j["substrate_clearance"] = f.substrate_clearance ? nlohmann::ordered_json(*f.substrate_clearance) : nlohmann::ordered_json(nullptr);
    j["detail"] = f.detail;
    return j;
}

inline MoveKind move_kind_from(const std::string& s) {
    for (MoveKind k : {MoveKind::Travel, MoveKind::Extrude, MoveKind::Retract, MoveKind::Unretract})
        if (s == to_string(k))
            return k;
    throw Error(ErrorCode::MalformedTrace, "simcheck", "unknown move kind '" + s + "'");
}

inline Frame from_json(const nlohmann::json& j) {
    Frame f;
    f.index = j.at("i").get<std::size_t>();
    f.time = j.at("time").get<double>();
    const auto& p = j.at("pose");
    f.pose = {p.at("x").get<double>(), p.at("y").get<double>(), p.at("z").get<double>(), p.at("u").get<double>(),
              p.at("v").get<double>(), p.at("e").get<double>(), p.at("f").get<double>()};
    f.kind = move_kind_from(j.at("kind").get<std::string>());
    f.axis_speeds = j.at("axis_speeds").get<std::array<double, 6>>();
    const auto& bed = j.at("bed_world_transform");
    auto r = bed.at("rotation").get<std::array<double, 9>>();
    for (int k = 0; k < 9; ++k)
        f.bed_rotation(k / 3, k % 3) = r[k];
    auto t = bed.at("translation").get<std::array<double, 3>>();
    f.bed_translation = Vec3(t[0], t[1], t[2]);
    for (const auto& flag : j.at("flags")) {
        std::string s = flag.get<std::string>();
        if (s == "collision_bed")
            f.collision_bed = true;
        else if (s == "collision_substrate")
            f.collision_substrate = true;
        else if (s == "axis_violation")
            f.axis_violation = true;
        else
            throw Error(ErrorCode::MalformedTrace, "simcheck", "unknown flag '" + s + "'");
    }
    if (!j.at("offending_axis").is_null())
        f.offending_axis = j.at("offending_axis").get<std::string>();
    f.min_clearance = j.at("min_clearance").get<double>();
    f.bed_clearance = j.at("bed_clearance").get<double>();
    if (!j.at("substrate_clearance").is_null())
        f.substrate_clearance = j.at("substrate_clearance").get<double>();
    f.detail = j.at("detail").get<std::string>();
    return f;
}

} // namespace detail

/// Header line, then one JSON object per frame per line.
inline std::string export_trace(const SimTrace& trace) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const Frame& f : trace.frames) {
        out += detail::to_json(f).dump();
        out += '\n';
    }
    return out;
}

inline SimTrace read_trace(std::string_view text) {
    auto nl = text.find('\n');
    if (detail::trim(text.substr(0, nl)) != kTraceHeader)
        throw Error(ErrorCode::MalformedTrace, "simcheck", "missing '" + std::string(kTraceHeader) + "' header");
    SimTrace trace;
    std::size_t line_no = 1;
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    while (!text.empty()) {
        ++line_no;
        nl = text.find('\n');
        std::string_view line = detail::trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty())
            continue;
        try {
            trace.frames.push_back(detail::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedTrace, "simcheck", "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return trace;
}

} // namespace open5x

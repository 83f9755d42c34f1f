#pragma once

#include "open5x/config.hpp"
#include "open5x/gcode.hpp"
#include "open5x/mesh.hpp"
#include "open5x/program.hpp"
#include "open5x/simcheck.hpp"
#include "open5x/toolpath.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

// Pipeline jobs shared by the command line and the HTTP service, so both
// produce the same bytes for the same inputs.
namespace open5x::jobs {

using Json = nlohmann::ordered_json;

/// Slicing parameters plus the per-job speed overrides.
struct JobParams {
    SliceParams slice;
    std::optional<double> print_speed;
    std::optional<double> travel_speed;
    bool clamp_speeds = false;
};

/// The substrate bounding box shrunk to half size about its centre.
inline Polygon2 default_region(const SurfaceMesh& mesh) {
    const Aabb& b = mesh.bounds();
    Vec2 c = b.center().head<2>();
    Vec2 h = 0.25 * (b.hi - b.lo).head<2>();
    return {Vec2(c.x() - h.x(), c.y() - h.y()), Vec2(c.x() + h.x(), c.y() - h.y()),
            Vec2(c.x() + h.x(), c.y() + h.y()), Vec2(c.x() - h.x(), c.y() + h.y())};
}

/// Parses "x,y x,y ..." into a polygon.
inline Polygon2 parse_region(std::string_view text) {
    Polygon2 poly;
    std::string s(text);
    for (char& ch : s)
        if (ch == ',' || ch == ';')
            ch = ' ';
    std::istringstream in(s);
    double x, y;
    while (in >> x) {
        if (!(in >> y))
            throw Error(ErrorCode::InvalidParams, "cli", "region needs x,y pairs");
        poly.emplace_back(x, y);
    }
    if (!in.eof())
        throw Error(ErrorCode::InvalidParams, "cli", "region contains a non-number");
    return poly;
}

inline std::vector<FieldError> validate(const JobParams& p) {
    auto errors = open5x::validate(p.slice);
    if (p.print_speed && !(*p.print_speed > 0.0))
        errors.push_back({"print_speed", "must be > 0"});
    if (p.travel_speed && !(*p.travel_speed > 0.0))
        errors.push_back({"travel_speed", "must be > 0"});
    return errors;
}

/// Reads a JSON params object. Missing fields keep their defaults; an
/// absent region stays empty so the caller can fill in the default.
inline JobParams params_from_json(const nlohmann::json& j, std::vector<FieldError>& errors) {
    JobParams p;
    if (!j.is_object()) {
        if (!j.is_null())
            errors.push_back({"body", "must be a JSON object"});
        return p;
    }
    auto number = [&](const char* key, double& out) {
        if (!j.contains(key))
            return;
        if (!j[key].is_number())
            errors.push_back({key, "must be a number"});
        else
            out = j[key].get<double>();
    };
    auto integer = [&](const char* key, int& out) {
        if (!j.contains(key))
            return;
        if (!j[key].is_number_integer())
            errors.push_back({key, "must be an integer"});
        else
            out = j[key].get<int>();
    };
    auto optional_number = [&](const char* key, std::optional<double>& out) {
        if (!j.contains(key))
            return;
        double v = 0.0;
        number(key, v);
        if (j[key].is_number())
            out = v;
    };
    static const std::vector<std::string> known = {
        "nozzle_diameter", "layer_height", "layer_count", "travel_height",  "infill_angle", "infill_spacing",
        "perimeter_count", "segment_length", "region",     "print_speed",    "travel_speed", "clamp_speeds"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            errors.push_back({key, "unknown field"});

    number("nozzle_diameter", p.slice.nozzle_diameter);
    number("layer_height", p.slice.layer_height);
    integer("layer_count", p.slice.layer_count);
    number("travel_height", p.slice.travel_height);
    number("infill_angle", p.slice.infill_angle);
    number("infill_spacing", p.slice.infill_spacing);
    integer("perimeter_count", p.slice.perimeter_count);
    number("segment_length", p.slice.segment_length);
    optional_number("print_speed", p.print_speed);
    optional_number("travel_speed", p.travel_speed);
    if (j.contains("clamp_speeds")) {
        if (!j["clamp_speeds"].is_boolean())
            errors.push_back({"clamp_speeds", "must be true or false"});
        else
            p.clamp_speeds = j["clamp_speeds"].get<bool>();
    }
    if (j.contains("region")) {
        const auto& r = j["region"];
        bool ok = r.is_array();
        if (ok)
            for (const auto& v : r)
                ok = ok && v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number();
        if (!ok)
            errors.push_back({"region", "must be an array of [x, y] pairs"});
        else
            for (const auto& v : r)
                p.slice.region.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    return p;
}

inline Json errors_json(const std::vector<FieldError>& errors) {
    Json list = Json::array();
    for (const auto& e : errors)
        list.push_back({{"field", e.field}, {"message", e.message}});
    return {{"errors", list}};
}

struct JobResult {
    MachineProgram program;
    std::string gcode;
    ProgramSummary summary;
    std::vector<ProgramViolation> violations;
    std::vector<std::string> warnings;
    std::size_t clamped_moves = 0;
};

inline ExtrusionSettings settings_for(const JobParams& p, const MachineConfig& c) {
    return {p.slice.nozzle_diameter, p.slice.layer_height, p.print_speed.value_or(c.print_speed),
            p.travel_speed.value_or(c.travel_speed)};
}

inline JobResult finish(const Toolpath& tp, const JobParams& p, const MachineConfig& c) {
    JobResult r;
    r.warnings = tp.warnings;
    r.program = build_program(tp, c, settings_for(p, c), p.slice.travel_height);
    if (p.clamp_speeds)
        r.clamped_moves = clamp_speeds(r.program, c);
    r.violations = check_program(r.program, c);
    r.summary = summarize(r.program, c);
    r.gcode = emit(r.program);
    return r;
}

/// Thrown when a finished toolpath breaks its own structural contract.
struct InvariantBreach : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// mesh -> toolpath -> kinematics -> motion -> G-code.
inline JobResult slice_job(const SurfaceMesh& mesh, JobParams p, const MachineConfig& c) {
    if (p.slice.region.empty())
        p.slice.region = default_region(mesh);
    if (auto errors = validate(p); !errors.empty()) {
        std::string msg;
        for (const auto& e : errors)
            msg += (msg.empty() ? "" : "; ") + e.field + " " + e.message;
        throw Error(ErrorCode::InvalidParams, "toolpath", msg);
    }
    Toolpath tp = slice(mesh, p.slice, c.retract_length);
    if (auto broken = check_invariants(tp, p.slice.segment_length); !broken.empty())
        throw InvariantBreach("toolpath: " + broken.front());
    return finish(tp, p, c);
}

/// Point-and-normal paths straight to G-code, in file order.
inline JobResult postprocess_job(std::string_view cls_text, const JobParams& p, const MachineConfig& c) {
    Toolpath paths = parse_cls(cls_text);
    std::vector<std::vector<Extrude>> groups;
    for (const Move& m : paths.moves)
        groups.push_back({std::get<Extrude>(m)});
    return finish(plan_travels(groups, p.slice, c.retract_length), p, c);
}

inline SimTrace simulate_job(std::string_view gcode, const MachineConfig& c, const SurfaceMesh* substrate,
                             std::optional<double> margin = std::nullopt) {
    return replay(parse(gcode).program, c, substrate, margin);
}

struct CheckReport {
    ParsedProgram parsed;
    std::vector<ProgramViolation> violations;
};

inline CheckReport check_job(std::string_view gcode, const MachineConfig& c) {
    CheckReport r{parse(gcode), {}};
    r.violations = check_program(r.parsed.program, c);
    return r;
}

inline const char* to_string(ViolationKind k) { return k == ViolationKind::Speed ? "speed" : "range"; }

inline Json violations_json(const std::vector<ProgramViolation>& violations, const std::vector<std::size_t>* lines) {
    Json list = Json::array();
    for (const auto& v : violations) {
        Json item = {{"move", v.move}};
        if (lines && v.move < lines->size())
            item["line"] = (*lines)[v.move];
        item["axis"] = axis_name(v.axis);
        item["kind"] = to_string(v.kind);
        item["value"] = v.value;
        item["limit"] = v.limit;
        list.push_back(item);
    }
    return list;
}

inline Json summary_json(const JobResult& r) {
    const ProgramSummary& s = r.summary;
    Json speeds;
    for (Axis a : kAllAxes)
        speeds[axis_name(a)] = s.max_axis_speed[static_cast<int>(a)];
    return {{"moves", s.move_count},
            {"paths", s.path_count},
            {"segments", s.segment_count},
            {"print_time_estimate_min", s.print_time_min},
            {"max_axis_speed", speeds},
            {"violations", s.violation_count},
            {"clamped_moves", r.clamped_moves},
            {"u_min", s.u_min},
            {"u_max", s.u_max},
            {"v_min", s.v_min},
            {"v_max", s.v_max},
            {"filament_mm", s.filament_mm},
            {"warnings", r.warnings}};
}

inline Json trace_summary_json(const SimTrace& t) {
    std::size_t bed = 0, substrate = 0, axis = 0;
    double min_clearance = std::numeric_limits<double>::infinity();
    for (const Frame& f : t.frames) {
        bed += f.collision_bed;
        substrate += f.collision_substrate;
        axis += f.axis_violation;
        min_clearance = std::min(min_clearance, f.min_clearance);
    }
    return {{"frames", t.frames.size()},
            {"flagged_frames", t.flagged_count()},
            {"collision_bed", bed},
            {"collision_substrate", substrate},
            {"axis_violation", axis},
            {"total_time_s", t.total_time()},
            {"min_clearance", t.frames.empty() ? Json(nullptr) : Json(min_clearance)}};
}

inline Json mesh_json(const SurfaceMesh& mesh) {
    Json v = Json::array(), n = Json::array(), t = Json::array();
    for (const Vec3& p : mesh.vertices())
        v.push_back({p.x(), p.y(), p.z()});
    for (const Vec3& p : mesh.vertex_normals())
        n.push_back({p.x(), p.y(), p.z()});
    for (const auto& tri : mesh.triangles())
        t.push_back({tri[0], tri[1], tri[2]});
    return {{"vertices", v}, {"normals", n}, {"triangles", t}};
}

inline std::string read_file(const std::string& path, const char* module) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::InvalidParams, module, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SurfaceMesh load_mesh_file(const std::string& path) { return load_stl(read_file(path, "mesh")); }

} // namespace open5x::jobs

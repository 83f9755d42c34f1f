#pragma once

#include "open5x/error.hpp"
#include "open5x/kinematics.hpp"
#include "open5x/motion.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace open5x {

struct AxisRange {
    double min;
    double max;
};

/// Machine description. Lengths in mm, angles in degrees, speeds in mm/min
/// (deg/min for U and V).
struct MachineConfig {
    AxisRange x{-125.0, 125.0};
    AxisRange y{-105.0, 105.0};
    AxisRange z{0.0, 200.0};
    AxisRange u{0.0, 90.0};

    AxisLimits limits{{12000.0, 12000.0, 3000.0, 30000.0, 30000.0, 3600.0}};

    Vec3 pivot{0.0, 0.0, 0.0};
    double bed_diameter = 60.0;
    double bed_surface_z = 0.0;

    double nozzle_diameter = 0.4;
    double filament_diameter = 1.75;

    double retract_length = 0.8;
    double retract_speed = 2400.0;

    double print_speed = 1200.0;
    double travel_speed = 3000.0;
    double rotary_speed = 3000.0; // for moves that only turn the bed

    double nozzle_tip_radius = 0.5;
    double nozzle_cone_half_angle = 30.0;
    double nozzle_cone_length = 8.0;

    double safety_margin = 0.5;

    PivotGeometry pivot_geometry() const { return PivotGeometry{pivot, Vec3::UnitY()}; }
};

namespace detail {

template <class Fn>
inline void for_each_config_field(MachineConfig& c, Fn&& fn) {
    fn("x_min", c.x.min);
    fn("x_max", c.x.max);
    fn("y_min", c.y.min);
    fn("y_max", c.y.max);
    fn("z_min", c.z.min);
    fn("z_max", c.z.max);
    fn("u_min", c.u.min);
    fn("u_max", c.u.max);
    fn("max_speed_x", c.limits.max_speed[0]);
    fn("max_speed_y", c.limits.max_speed[1]);
    fn("max_speed_z", c.limits.max_speed[2]);
    fn("max_speed_u", c.limits.max_speed[3]);
    fn("max_speed_v", c.limits.max_speed[4]);
    fn("max_speed_e", c.limits.max_speed[5]);
    fn("pivot_x", c.pivot.x());
    fn("pivot_y", c.pivot.y());
    fn("pivot_z", c.pivot.z());
    fn("bed_diameter", c.bed_diameter);
    fn("bed_surface_z", c.bed_surface_z);
    fn("nozzle_diameter", c.nozzle_diameter);
    fn("filament_diameter", c.filament_diameter);
    fn("retract_length", c.retract_length);
    fn("retract_speed", c.retract_speed);
    fn("print_speed", c.print_speed);
    fn("travel_speed", c.travel_speed);
    fn("rotary_speed", c.rotary_speed);
    fn("nozzle_tip_radius", c.nozzle_tip_radius);
    fn("nozzle_cone_half_angle", c.nozzle_cone_half_angle);
    fn("nozzle_cone_length", c.nozzle_cone_length);
    fn("safety_margin", c.safety_margin);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Every key the config file accepts, in file order.
inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    MachineConfig c;
    detail::for_each_config_field(c, [&](const char* k, double&) { keys.emplace_back(k); });
    return keys;
}

inline void validate(const MachineConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::MalformedConfig, "config", msg); };
    for (auto [name, r] : {std::pair{"x", c.x}, {"y", c.y}, {"z", c.z}, {"u", c.u}})
        if (!(r.min < r.max))
            fail(std::string(name) + "_min must be below " + name + "_max");
    for (Axis a : kAllAxes)
        if (!(c.limits[a] > 0.0))
            fail(std::string("max_speed_") + static_cast<char>(std::tolower(*axis_name(a))) + " must be > 0");
    auto positive = [&](const char* key, double v) {
        if (!(v > 0.0))
            fail(std::string(key) + " must be > 0");
    };
    positive("bed_diameter", c.bed_diameter);
    positive("nozzle_diameter", c.nozzle_diameter);
    positive("filament_diameter", c.filament_diameter);
    positive("retract_speed", c.retract_speed);
    positive("print_speed", c.print_speed);
    positive("travel_speed", c.travel_speed);
    positive("rotary_speed", c.rotary_speed);
    positive("nozzle_tip_radius", c.nozzle_tip_radius);
    positive("nozzle_cone_length", c.nozzle_cone_length);
    if (!(c.retract_length >= 0.0))
        fail("retract_length must be >= 0");
    if (!(c.safety_margin >= 0.0))
        fail("safety_margin must be >= 0");
    if (!(c.nozzle_cone_half_angle > 0.0 && c.nozzle_cone_half_angle < 90.0))
        fail("nozzle_cone_half_angle must be in (0, 90)");
}

/// Parses `key = value` lines over the defaults. `#` starts a comment.
/// Unknown or repeated keys are errors.
inline MachineConfig parse_config(std::string_view text) {
    MachineConfig config;
    std::map<std::string, double*, std::less<>> fields;
    detail::for_each_config_field(config, [&](const char* k, double& v) { fields.emplace(k, &v); });
    std::set<std::string, std::less<>> seen;

    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::MalformedConfig, "config", where + "expected 'key = value'");
        std::string_view key = detail::trim(line.substr(0, eq));
        std::string_view value = detail::trim(line.substr(eq + 1));
        auto it = fields.find(key);
        if (it == fields.end())
            throw Error(ErrorCode::MalformedConfig, "config", where + "unknown key '" + std::string(key) + "'");
        if (!seen.emplace(key).second)
            throw Error(ErrorCode::MalformedConfig, "config", where + "duplicate key '" + std::string(key) + "'");
        double v;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v))
            throw Error(ErrorCode::MalformedConfig, "config",
                        where + "value for '" + std::string(key) + "' is not a number");
        *it->second = v;
    }
    validate(config);
    return config;
}

inline MachineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::MalformedConfig, "config", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string to_text(MachineConfig c) {
    std::string out;
    detail::for_each_config_field(c, [&](const char* k, double& v) {
        char buf[32];
        auto end = std::to_chars(buf, buf + sizeof buf, v).ptr; // shortest round trip
        out += std::string(k) + " = " + std::string(buf, end) + '\n';
    });
    return out;
}

} // namespace open5x

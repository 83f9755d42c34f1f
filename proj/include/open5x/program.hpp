#pragma once

#include "open5x/config.hpp"
#include "open5x/kinematics.hpp"
#include "open5x/motion.hpp"
#include "open5x/toolpath.hpp"

#include <cmath>
#include <optional>
#include <variant>
#include <vector>

namespace open5x {

enum class MoveKind { Travel, Extrude, Retract, Unretract };

inline const char* to_string(MoveKind k) {
    switch (k) {
    case MoveKind::Travel: return "travel";
    case MoveKind::Extrude: return "extrude";
    case MoveKind::Retract: return "retract";
    case MoveKind::Unretract: return "unretract";
    }
    return "?";
}

/// One machine move: the pose reached at its end and how it gets there.
struct MachineMove {
    MachinePose pose;
    MoveKind kind = MoveKind::Travel;
    bool path_start = false;     // first move of a path; F is always written
    double surface_length = 0.0; // length covered in part coordinates, mm
};

struct MachineProgram {
    std::vector<MachineMove> moves;
};

/// Output quantization. Poses are rounded before feedrates are computed.
inline constexpr double kLinearQuantum = 1e-4;
inline constexpr double kAngularQuantum = 1e-3;
inline constexpr double kExtrusionQuantum = 1e-5;

inline double quantize(double v, double quantum) {
    double q = std::round(v / quantum) * quantum;
    return q == 0.0 ? 0.0 : q; // no negative zero
}

/// Below this tilt the bed spin is held at its previous value.
inline constexpr double kSpinHoldTilt = 0.01;

struct ExtrusionSettings {
    double nozzle_diameter = 0.4;
    double layer_height = 0.2;
    double print_speed = 1200.0;
    double travel_speed = 3000.0;
};

namespace detail {

class ProgramBuilder {
public:
    ProgramBuilder(const MachineConfig& config, const ExtrusionSettings& settings)
        : config_(config), settings_(settings), pivot_(config.pivot_geometry()) {}

    struct Oriented {
        double u, v;
    };

    Oriented orient(const Vec3& normal) {
        BedAngles a = solve_angles(normal);
        double v = a.u < kSpinHoldTilt ? last_v_ : unwrap_rotary(last_v_, a.v < 0.0 ? a.v + 360.0 : a.v);
        Oriented o{quantize(a.u, kAngularQuantum), quantize(v, kAngularQuantum)};
        last_v_ = o.v;
        return o;
    }

    MachinePose place(const Vec3& part_point, const Oriented& o) const {
        Vec3 tip = rotate_to_machine(part_point, o.u, o.v, pivot_);
        MachinePose p = state_.value_or(MachinePose{});
        p.x = quantize(tip.x(), kLinearQuantum);
        p.y = quantize(tip.y(), kLinearQuantum);
        p.z = quantize(tip.z(), kLinearQuantum);
        p.u = o.u;
        p.v = o.v;
        return p;
    }

    bool has_state() const { return state_.has_value(); }
    const MachinePose& state() const { return *state_; }
    Oriented current_orientation() const { return {state_->u, state_->v}; }

    /// Appends a positioning or extrusion move; zero-motion moves vanish.
    void move_to(MachinePose target, MoveKind kind, double surface_length, double base_feed, bool path_start) {
        if (!state_) {
            target.f = base_feed;
            push({target, MoveKind::Travel, true, surface_length});
            return;
        }
        AxisDeltas deltas = AxisDeltas::between(*state_, target);
        double d = joint_distance(deltas);
        if (d == 0.0)
            return;
        if (surface_length <= kZeroLength) {
            // pure bed rotation: no surface speed to preserve
            kind = MoveKind::Travel;
            target.f = config_.rotary_speed;
        } else {
            target.f = compensate_feedrate(deltas, surface_length, base_feed);
        }
        push({target, kind, path_start, surface_length});
    }

    void filament(double length, MoveKind kind) {
        if (!state_ || length == 0.0)
            return;
        MachinePose p = *state_;
        p.e += kind == MoveKind::Retract ? -length : length;
        p.f = config_.retract_speed;
        push({p, kind, false, 0.0});
    }

    void travel(const Travel& t) {
        Oriented from = current_orientation();
        push_leg(place(t.lifted_from(), from), t.lift, true);
        Oriented to = orient(t.to.normal);
        push_leg(place(t.lifted_to(), to), (t.lifted_to() - t.lifted_from()).norm(), false);
        push_leg(place(t.to.position, to), t.lift, false);
        last_part_ = t.to.position;
    }

    void extrude(const Extrude& path) {
        if (path.samples.empty())
            return;
        const PathSample& first = path.samples.front();
        MachinePose start = place(first.position, orient(first.normal));
        move_to(start, MoveKind::Travel, surface_distance_to(first.position), settings_.travel_speed, false);
        last_part_ = first.position;
        bool path_start = true;
        for (std::size_t k = 1; k < path.samples.size(); ++k) {
            const PathSample& s = path.samples[k];
            double l = (s.position - path.samples[k - 1].position).norm();
            MachinePose target = place(s.position, orient(s.normal));
            if (l > kZeroLength)
                target.e = state_->e + quantize(compute_extrusion(l, settings_.nozzle_diameter, settings_.layer_height,
                                                                  config_.filament_diameter),
                                                kExtrusionQuantum);
            std::size_t before = program_.moves.size();
            move_to(target, MoveKind::Extrude, l, settings_.print_speed, path_start);
            if (program_.moves.size() != before && program_.moves.back().kind == MoveKind::Extrude)
                path_start = false;
            last_part_ = s.position;
        }
    }

    /// Lifted approach to the first sample of the program.
    void approach(const PathSample& first, double lift) {
        Oriented o = orient(first.normal);
        Vec3 above = first.position + lift * first.normal;
        move_to(place(above, o), MoveKind::Travel, 0.0, settings_.travel_speed, true);
        last_part_ = above;
        move_to(place(first.position, o), MoveKind::Travel, lift, settings_.travel_speed, false);
        last_part_ = first.position;
    }

    MachineProgram take() { return std::move(program_); }

private:
    double surface_distance_to(const Vec3& p) const { return last_part_ ? (p - *last_part_).norm() : 0.0; }

    void push_leg(const MachinePose& target, double surface_length, bool path_start) {
        move_to(target, MoveKind::Travel, surface_length, settings_.travel_speed, path_start);
    }

    void push(const MachineMove& m) {
        program_.moves.push_back(m);
        state_ = m.pose;
    }

    const MachineConfig& config_;
    ExtrusionSettings settings_;
    PivotGeometry pivot_;
    MachineProgram program_;
    std::optional<MachinePose> state_;
    std::optional<Vec3> last_part_;
    double last_v_ = 0.0;
};

} // namespace detail

/// Inverse kinematics, rotary unwrapping, extrusion and feedrate
/// compensation over a whole toolpath. The program opens with a lifted
/// approach to the first sample.
inline MachineProgram build_program(const Toolpath& tp, const MachineConfig& config, const ExtrusionSettings& settings,
                                    double approach_lift) {
    detail::ProgramBuilder b(config, settings);
    for (const Move& m : tp.moves) {
        if (auto* e = std::get_if<Extrude>(&m); e && !e->samples.empty()) {
            b.approach(e->samples.front(), approach_lift);
            break;
        }
    }
    for (const Move& m : tp.moves) {
        std::visit(
            [&](const auto& mv) {
                using T = std::decay_t<decltype(mv)>;
                if constexpr (std::is_same_v<T, Extrude>)
                    b.extrude(mv);
                else if constexpr (std::is_same_v<T, Travel>)
                    b.travel(mv);
                else if constexpr (std::is_same_v<T, Retract>)
                    b.filament(mv.length, MoveKind::Retract);
                else
                    b.filament(mv.length, MoveKind::Unretract);
            },
            m);
    }
    return b.take();
}

enum class ViolationKind { Speed, Range };

struct ProgramViolation {
    std::size_t move;
    Axis axis;
    ViolationKind kind;
    double value;
    double limit;
};

inline std::vector<ProgramViolation> range_violations(const MachinePose& p, std::size_t index,
                                                      const MachineConfig& c) {
    std::vector<ProgramViolation> out;
    auto check = [&](Axis a, double v, const AxisRange& r) {
        if (v < r.min - 1e-9)
            out.push_back({index, a, ViolationKind::Range, v, r.min});
        else if (v > r.max + 1e-9)
            out.push_back({index, a, ViolationKind::Range, v, r.max});
    };
    check(Axis::X, p.x, c.x);
    check(Axis::Y, p.y, c.y);
    check(Axis::Z, p.z, c.z);
    check(Axis::U, p.u, c.u);
    return out;
}

/// Per-move speed reports; index 0 has no predecessor and reports zeros.
inline std::vector<SpeedReport> speed_reports(const MachineProgram& prog, const MachineConfig& c) {
    std::vector<SpeedReport> out(prog.moves.size());
    for (std::size_t i = 1; i < prog.moves.size(); ++i)
        out[i] = check_axis_speeds(prog.moves[i - 1].pose, prog.moves[i].pose, prog.moves[i].pose.f, c.limits);
    return out;
}

inline std::vector<ProgramViolation> check_program(const MachineProgram& prog, const MachineConfig& c) {
    std::vector<ProgramViolation> out;
    auto reports = speed_reports(prog, c);
    for (std::size_t i = 0; i < prog.moves.size(); ++i) {
        for (const auto& v : reports[i].violations)
            out.push_back({i, v.axis, ViolationKind::Speed, v.speed, v.limit});
        auto r = range_violations(prog.moves[i].pose, i, c);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

/// Rescales every over-limit feedrate so its worst axis sits on its limit.
/// Returns the number of moves changed.
inline std::size_t clamp_speeds(MachineProgram& prog, const MachineConfig& c) {
    std::size_t changed = 0;
    for (std::size_t i = 1; i < prog.moves.size(); ++i) {
        auto& m = prog.moves[i];
        double f = clamp_feedrate(prog.moves[i - 1].pose, m.pose, m.pose.f, c.limits);
        if (f != m.pose.f) {
            m.pose.f = f;
            ++changed;
        }
    }
    return changed;
}

struct ProgramSummary {
    std::size_t move_count = 0;
    std::size_t path_count = 0;
    std::size_t segment_count = 0;
    double print_time_min = 0.0; // estimate: sum of d / F'
    std::array<double, 6> max_axis_speed{};
    std::size_t violation_count = 0;
    double u_min = 0.0, u_max = 0.0;
    double v_min = 0.0, v_max = 0.0;
    double filament_mm = 0.0;
};

inline ProgramSummary summarize(const MachineProgram& prog, const MachineConfig& c) {
    ProgramSummary s;
    s.move_count = prog.moves.size();
    auto reports = speed_reports(prog, c);
    bool first = true;
    for (std::size_t i = 0; i < prog.moves.size(); ++i) {
        const auto& m = prog.moves[i];
        if (m.kind == MoveKind::Extrude && i > 0) {
            ++s.segment_count;
            if (m.path_start)
                ++s.path_count;
            s.filament_mm += m.pose.e - prog.moves[i - 1].pose.e;
        }
        s.print_time_min += reports[i].duration_min;
        for (int a = 0; a < 6; ++a)
            s.max_axis_speed[a] = std::max(s.max_axis_speed[a], reports[i].speeds[a]);
        if (first) {
            s.u_min = s.u_max = m.pose.u;
            s.v_min = s.v_max = m.pose.v;
            first = false;
        }
        s.u_min = std::min(s.u_min, m.pose.u);
        s.u_max = std::max(s.u_max, m.pose.u);
        s.v_min = std::min(s.v_min, m.pose.v);
        s.v_max = std::max(s.v_max, m.pose.v);
    }
    s.violation_count = check_program(prog, c).size();
    return s;
}

} // namespace open5x

// One PASS/FAIL line per acceptance criterion; nonzero exit on any failure.
#include "support.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

using namespace open5x;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok;
    std::string note;
};

Outcome pass(std::string note = {}) { return {true, std::move(note)}; }
Outcome fail(std::string note) { return {false, std::move(note)}; }

std::string num(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

std::string file_text(const fs::path& p) { return jobs::read_file(p.string(), "acceptance"); }

struct Demo {
    std::string name;
    Toolpath toolpath;
};

std::vector<Demo> demo_toolpaths() {
    MachineConfig c;
    SliceParams flat;
    flat.region = demo::flat_plate_region();
    SliceParams hemi;
    hemi.region = demo::hemisphere_region();
    return {{"flat_plate", slice(flat_plate_mesh(), flat, c.retract_length)},
            {"hemisphere", slice(hemisphere_mesh(), hemi, c.retract_length)},
            {"sample.cls", parse_cls(demo::sample_cls())}};
}

Outcome unwrap() {
    double v = unwrap_rotary(355.0, 1.0);
    if (v - 355.0 != 6.0)
        return fail("355 -> 1 gave delta " + num(v - 355.0));
    return pass("delta +6");
}

Outcome segment_spacing() {
    const double limit = SliceParams{}.segment_length + 1e-9;
    std::size_t pairs = 0;
    for (const Demo& d : demo_toolpaths()) {
        for (const Move& m : d.toolpath.moves) {
            const auto* e = std::get_if<Extrude>(&m);
            if (!e)
                continue;
            for (std::size_t k = 1; k < e->samples.size(); ++k, ++pairs) {
                double gap = (e->samples[k].position - e->samples[k - 1].position).norm();
                if (gap > limit)
                    return fail(d.name + ": sample gap " + num(gap));
            }
        }
    }
    return pass(std::to_string(pairs) + " pairs");
}

Outcome alignment() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> c(-40.0, 40.0);
    PivotGeometry pivot{Vec3(2.0, -3.0, 5.0), Vec3::UnitY()};
    double worst_align = 0.0, worst_back = 0.0;
    for (int k = 0; k < 10000; ++k) {
        Vec3 n = random_unit(rng);
        Vec3 p(c(rng), c(rng), c(rng));
        MachinePose pose = solve_pose(p, n, pivot);
        worst_align = std::max(worst_align, (bed_rotation(pose.u, pose.v, pivot) * n - Vec3::UnitZ()).norm());
        worst_back = std::max(worst_back, (rotate_to_part(Vec3(pose.x, pose.y, pose.z), pose.u, pose.v, pivot) - p).norm());
    }
    if (worst_align >= 1e-9 || worst_back >= 1e-9)
        return fail("residuals " + num(worst_align) + ", " + num(worst_back));
    return pass("max residual " + num(std::max(worst_align, worst_back)));
}

Outcome surface_speed() {
    MachineConfig c;
    jobs::JobParams p;
    p.slice.region = demo::hemisphere_region();
    auto job = jobs::slice_job(hemisphere_mesh(), p, c);
    const auto& mv = job.program.moves;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t i = 1; i < mv.size(); ++i) {
        if (mv[i].kind != MoveKind::Extrude)
            continue;
        double d = joint_distance(AxisDeltas::between(mv[i - 1].pose, mv[i].pose));
        double speed = mv[i].surface_length / (d / mv[i].pose.f);
        worst = std::max(worst, std::abs(speed / c.print_speed - 1.0));
        ++checked;
    }
    if (checked == 0 || worst > 1e-9)
        return fail("relative error " + num(worst));
    return pass(std::to_string(checked) + " segments, max error " + num(worst));
}

// XYZ trajectory straight from the toolpath: the lifted approach, every
// extrusion sample and the three legs of every travel.
std::vector<std::string> planar_reference(const Toolpath& tp, double approach_lift) {
    std::vector<std::string> out;
    auto add = [&](const Vec3& p) {
        std::string s = "X" + format_fixed(p.x(), 4) + " Y" + format_fixed(p.y(), 4) + " Z" + format_fixed(p.z(), 4);
        if (out.empty() || out.back() != s)
            out.push_back(s);
    };
    bool first = true;
    for (const Move& m : tp.moves) {
        if (const auto* e = std::get_if<Extrude>(&m)) {
            if (first && !e->samples.empty()) {
                add(e->samples.front().position + approach_lift * e->samples.front().normal);
                first = false;
            }
            for (const PathSample& s : e->samples)
                add(s.position);
        } else if (const auto* t = std::get_if<Travel>(&m)) {
            add(t->lifted_from());
            add(t->lifted_to());
            add(t->to.position);
        }
    }
    return out;
}

std::vector<std::string> gcode_xyz(const std::string& gcode) {
    std::vector<std::string> out;
    std::string x = "0.0000", y = "0.0000", z = "0.0000";
    std::istringstream in(gcode);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("G0", 0) != 0 && line.rfind("G1", 0) != 0)
            continue;
        bool moved = false;
        std::istringstream words(line);
        std::string w;
        while (words >> w) {
            std::string* slot = w[0] == 'X' ? &x : w[0] == 'Y' ? &y : w[0] == 'Z' ? &z : nullptr;
            if (slot) {
                *slot = w.substr(1);
                moved = true;
            }
        }
        std::string s = "X" + x + " Y" + y + " Z" + z;
        if (moved && (out.empty() || out.back() != s))
            out.push_back(s);
    }
    return out;
}

Outcome planar_reduction() {
    MachineConfig c;
    jobs::JobParams p;
    p.slice.region = demo::flat_plate_region();
    Toolpath tp = slice(flat_plate_mesh(), p.slice, c.retract_length);
    auto job = jobs::finish(tp, p, c);
    for (const MachineMove& m : job.program.moves)
        if (m.pose.u != 0.0 || m.pose.v != 0.0)
            return fail("rotary axis moved: u " + num(m.pose.u) + " v " + num(m.pose.v));
    if (job.gcode.find(" U") != job.gcode.rfind(" U") || job.gcode.find(" V") != job.gcode.rfind(" V"))
        return fail("rotary words beyond the first move");
    auto got = gcode_xyz(job.gcode);
    auto want = planar_reference(tp, p.slice.travel_height);
    if (got.size() != want.size())
        return fail(std::to_string(got.size()) + " positions, reference has " + std::to_string(want.size()));
    for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i] != want[i])
            return fail("position " + std::to_string(i) + ": '" + got[i] + "' vs '" + want[i] + "'");
    return pass(std::to_string(got.size()) + " positions identical");
}

MachineProgram random_stream(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lin(-120.0, 120.0), ang(-720.0, 720.0), tilt(0.0, 90.0),
        feed(60.0, 20000.0), small(0.0, 1.0);
    std::uniform_int_distribution<int> length(1, 60), kind(0, 9);
    auto grid = [](double v, double q) { return std::round(v / q) * q; };
    MachineProgram prog;
    MachinePose pose{lin(rng), lin(rng), std::abs(lin(rng)), tilt(rng), ang(rng), 0.0, feed(rng)};
    prog.moves.push_back({pose, MoveKind::Travel, false, 0.0});
    bool retracted = false;
    const int n = length(rng);
    for (int k = 0; k < n; ++k) {
        int roll = kind(rng);
        MachineMove m{pose, MoveKind::Travel, false, 0.0};
        if (roll == 0 && !retracted) {
            m.kind = MoveKind::Retract;
            m.pose.e = grid(pose.e - 0.8, 1e-5);
            retracted = true;
        } else if (roll == 1 && retracted) {
            m.kind = MoveKind::Unretract;
            m.pose.e = grid(pose.e + 0.8, 1e-5);
            retracted = false;
        } else {
            m.pose.x = lin(rng);
            m.pose.y = lin(rng);
            m.pose.z = std::abs(lin(rng));
            m.pose.u = tilt(rng);
            m.pose.v = ang(rng);
            if (roll >= 5) {
                m.kind = MoveKind::Extrude;
                m.pose.e = grid(pose.e + 1e-4 + small(rng), 1e-5);
            }
        }
        m.pose.f = feed(rng);
        m.path_start = m.kind == MoveKind::Extrude && prog.moves.back().kind != MoveKind::Extrude;
        prog.moves.push_back(m);
        pose = m.pose;
    }
    return prog;
}

Outcome gcode_round_trip() {
    std::mt19937_64 rng(77);
    std::size_t moves = 0;
    for (int s = 0; s < 1000; ++s) {
        MachineProgram p = random_stream(rng);
        MachineProgram q = parse(emit(p)).program;
        const std::string where = "stream " + std::to_string(s);
        if (q.moves.size() != p.moves.size())
            return fail(where + ": " + std::to_string(q.moves.size()) + " moves vs " + std::to_string(p.moves.size()));
        for (std::size_t i = 0; i < p.moves.size(); ++i, ++moves) {
            const MachinePose &a = p.moves[i].pose, &b = q.moves[i].pose;
            bool same = p.moves[i].kind == q.moves[i].kind && p.moves[i].path_start == q.moves[i].path_start &&
                        std::abs(a.x - b.x) <= 5e-5 + 1e-9 && std::abs(a.y - b.y) <= 5e-5 + 1e-9 &&
                        std::abs(a.z - b.z) <= 5e-5 + 1e-9 && std::abs(a.u - b.u) <= 5e-4 + 1e-9 &&
                        std::abs(a.v - b.v) <= 5e-4 + 1e-9 && std::abs(a.e - b.e) <= 5e-5 &&
                        std::abs(a.f - b.f) <= 1e-3 + 1e-9;
            if (!same)
                return fail(where + " move " + std::to_string(i) + " differs");
        }
    }
    return pass(std::to_string(moves) + " moves");
}

// Tight circle with the normal leaning out at 30 degrees: the bed spins a
// full turn while the nozzle covers about 6 mm.
Toolpath spinning_path() {
    Extrude e;
    for (int k = 0; k <= 63; ++k) {
        double a = 0.1 * k;
        Vec3 dir(std::cos(a), std::sin(a), 0.0);
        Vec3 n = std::sin(deg_to_rad(30.0)) * dir + std::cos(deg_to_rad(30.0)) * Vec3::UnitZ();
        e.samples.push_back({dir + Vec3(0, 0, 5), n});
    }
    Toolpath tp;
    tp.moves.push_back(e);
    return tp;
}

Outcome axis_limits() {
    MachineConfig c;
    jobs::JobParams p;
    auto raw = jobs::finish(spinning_path(), p, c);
    if (raw.violations.empty())
        return fail("no violation reported");
    for (const auto& v : raw.violations)
        if (v.kind != ViolationKind::Speed || v.axis != Axis::V)
            return fail(std::string("violation names ") + axis_name(v.axis));
    p.clamp_speeds = true;
    auto clamped = jobs::finish(spinning_path(), p, c);
    if (!clamped.violations.empty())
        return fail(std::to_string(clamped.violations.size()) + " violations after clamping");
    double worst = 0.0;
    for (const SpeedReport& r : speed_reports(clamped.program, c))
        worst = std::max(worst, r.worst_ratio(c.limits));
    if (std::abs(worst - 1.0) > 1e-6)
        return fail("worst axis at " + num(worst) + " of its limit");
    return pass(std::to_string(raw.violations.size()) + " V violations, clamped to " + num(worst) + " of limit");
}

Outcome collision_oracle() {
    double worst = 0.0;
    for (const CollisionSample& s : collision_samples(100, 4242))
        worst = std::max(worst, std::abs(clearance(s.frustum, s.bed) - brute_clearance(s.frustum, s.bed)));
    if (worst > 1e-6)
        return fail("disagreement " + num(worst) + " mm");
    MachineConfig c;
    MachineProgram prog;
    MachinePose safe{0, 0, 40, 0, 0, 0, 3000};
    MachinePose into{c.pivot.x(), c.pivot.y(), c.pivot.z() + 0.5 * c.bed_diameter - 1.0, 90, 0, 0, 3000};
    prog.moves.push_back({safe, MoveKind::Travel, true, 0.0});
    prog.moves.push_back({into, MoveKind::Travel, false, 0.0});
    SimTrace t = replay(prog, c);
    if (t.frames.size() != 2 || !t.frames[1].collision_bed)
        return fail("interpenetrating pose not flagged");
    return pass("max disagreement " + num(worst) + " mm, synthetic pose flagged");
}

int run_cli(const std::string& args) {
    int status = std::system((std::string(OPEN5X_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const fs::path dir = fs::path(OPEN5X_SCRATCH) / "acceptance_scratch";
    fs::create_directories(dir);
    const std::string stl = (fs::path(OPEN5X_DATA) / "hemisphere.stl").string();
    std::string outputs[2][2];
    for (int k = 0; k < 2; ++k) {
        fs::path g = dir / ("run" + std::to_string(k) + ".gcode"), t = dir / ("run" + std::to_string(k) + ".trace");
        int code = run_cli("slice -i " + stl + " --region \"5,-4 13,-4 13,4 5,4\" -o " + g.string() + " --trace " +
                           t.string());
        if (code != 0 && code != 3)
            return fail("slice exited " + std::to_string(code));
        outputs[k][0] = file_text(g);
        outputs[k][1] = file_text(t);
    }
    if (outputs[0][0] != outputs[1][0])
        return fail("G-code differs");
    if (outputs[0][1] != outputs[1][1])
        return fail("trace differs");
    return pass(std::to_string(outputs[0][0].size()) + " + " + std::to_string(outputs[0][1].size()) + " bytes identical");
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"rotary unwrap 355 -> 1", unwrap},
        {"segment spacing on demo inputs", segment_spacing},
        {"kinematic alignment, 10000 normals", alignment},
        {"feedrate compensation keeps surface speed", surface_speed},
        {"planar reduction", planar_reduction},
        {"G-code round trip, 1000 streams", gcode_round_trip},
        {"axis limits and clamping", axis_limits},
        {"collision oracle", collision_oracle},
        {"determinism of slice outputs", determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.ok ? "PASS " : "FAIL ") << name << " (" << num(ms) << " ms)";
        if (!o.note.empty())
            std::cout << ": " << o.note;
        std::cout << '\n';
        failures += !o.ok;
    }
    return failures == 0 ? 0 : 1;
}

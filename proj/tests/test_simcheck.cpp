#include "support.hpp"

#include <gtest/gtest.h>

using namespace open5x;
using namespace testing_support;

namespace {

const NozzleModel kNozzle{};

Frustum upright(Vec3 tip) { return Frustum::from(kNozzle, tip, Vec3::UnitZ()); }

MachineMove at(double x, double y, double z, double u, double v, double f, MoveKind kind = MoveKind::Travel) {
    MachineMove m;
    m.pose = {x, y, z, u, v, 0.0, f};
    m.kind = kind;
    return m;
}

jobs::JobResult flat_job() {
    jobs::JobParams p;
    p.slice.region = demo::flat_plate_region();
    return jobs::slice_job(flat_plate_mesh(), p, MachineConfig{});
}

} // namespace

TEST(Frustum, PointDistance) {
    Frustum f = upright(Vec3::Zero());
    const double r1 = 0.5 + 8.0 * std::tan(deg_to_rad(30.0));
    EXPECT_DOUBLE_EQ(f.r1, r1);
    EXPECT_EQ(distance(f, Vec3(0, 0, 4)), 0.0);
    EXPECT_DOUBLE_EQ(distance(f, Vec3(0, 0, -2)), 2.0);
    EXPECT_DOUBLE_EQ(distance(f, Vec3(0.5, 0, -1)), 1.0);
    EXPECT_DOUBLE_EQ(distance(f, Vec3(0, 0, 11)), 3.0);
    EXPECT_DOUBLE_EQ(distance(f, Vec3(r1 + 2.0, 0, 8.0 + 1.0)), std::sqrt(5.0));
    // straight out from the slanted side
    Vec3 side(0.5 + 4.0 * std::tan(deg_to_rad(30.0)), 0, 4);
    Vec3 out(std::cos(deg_to_rad(30.0)), 0, -std::sin(deg_to_rad(30.0)));
    EXPECT_NEAR(distance(f, side + 1.5 * out), 1.5, 1e-12);
}

TEST(Clearance, UprightOverDisc) {
    Disc bed{Vec3::Zero(), Vec3::UnitZ(), 30.0};
    EXPECT_DOUBLE_EQ(clearance(upright(Vec3(3, 4, 0.7)), bed), 0.7);
    // beside the rim: the disc edge 1 mm out from the tip rim meets the
    // slanted side at 1 * cos(30)
    EXPECT_NEAR(clearance(upright(Vec3(31.5, 0, 0.0)), bed), std::cos(deg_to_rad(30.0)), 1e-9);
    EXPECT_NEAR(clearance(upright(Vec3(31.5, 0, 0.0)), bed), brute_clearance(upright(Vec3(31.5, 0, 0.0)), bed), 1e-9);
    // pushed half a millimetre through the bed
    EXPECT_NEAR(clearance(upright(Vec3(0, 0, -0.5)), bed), -0.5, 1e-12);
}

TEST(Clearance, TiltedAgainstQuarterBed) {
    Disc bed{Vec3::Zero(), Vec3::UnitZ(), 30.0};
    // lying flat: the cone side rests at tip radius below the axis
    Frustum flat = Frustum::from(kNozzle, Vec3(0, 0, 2.0), Vec3::UnitX());
    EXPECT_NEAR(clearance(flat, bed), 2.0 - (0.5 + 8.0 * std::tan(deg_to_rad(30.0))), 1e-12);
}

TEST(Clearance, DiscMatchesOracle) {
    for (const CollisionSample& s : collision_samples(40, 99)) {
        double analytic = clearance(s.frustum, s.bed);
        double expected = brute_clearance(s.frustum, s.bed);
        if (expected > 0.0)
            EXPECT_NEAR(analytic, expected, 1e-6);
        else
            EXPECT_LE(analytic, 1e-9);
    }
}

TEST(Clearance, TriangleMatchesOracle) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> c(-6.0, 6.0);
    int positive = 0;
    for (int k = 0; k < 60; ++k) {
        Triangle3 t{Vec3(c(rng), c(rng), c(rng) - 8.0), Vec3(c(rng), c(rng), c(rng) - 8.0),
                    Vec3(c(rng), c(rng), c(rng) - 8.0)};
        Frustum f = Frustum::from(kNozzle, Vec3(c(rng), c(rng), c(rng)), random_unit(rng));
        double expected = brute_clearance(f, t);
        double analytic = clearance(f, t);
        if (expected > 1e-9) {
            ++positive;
            EXPECT_NEAR(analytic, expected, 1e-6) << k;
        } else {
            EXPECT_LE(analytic, 1e-9) << k;
        }
    }
    EXPECT_GT(positive, 30);
}

TEST(Replay, FlatPrintIsClean) {
    auto job = flat_job();
    SurfaceMesh mesh = flat_plate_mesh();
    SimTrace t = replay(job.program, MachineConfig{}, &mesh);
    EXPECT_EQ(t.flagged_count(), 0u);
    double lowest = std::numeric_limits<double>::infinity();
    for (const Frame& f : t.frames) {
        lowest = std::min(lowest, f.min_clearance);
        ASSERT_TRUE(f.substrate_clearance);
    }
    EXPECT_NEAR(lowest, 0.1, 1e-9);
}

TEST(Replay, QuarterTiltIntoBedIsFlagged) {
    MachineConfig c;
    MachineProgram prog;
    prog.moves.push_back(at(0, 0, 40, 0, 0, 3000));
    prog.moves.push_back(at(c.pivot.x(), c.pivot.y(), c.pivot.z() + 0.5 * c.bed_diameter - 1.0, 90, 0, 3000));
    SimTrace t = replay(prog, c);
    ASSERT_EQ(t.frames.size(), 2u);
    EXPECT_FALSE(t.frames[0].flagged());
    EXPECT_TRUE(t.frames[1].collision_bed);
    EXPECT_LT(t.frames[1].bed_clearance, 0.0);
    EXPECT_NE(t.frames[1].detail.find("bed clearance"), std::string::npos);
}

TEST(Replay, FrameCountAndTime) {
    MachineProgram prog;
    prog.moves.push_back(at(0, 0, 10, 0, 0, 600));
    prog.moves.push_back(at(10, 0, 10, 0, 0, 600));
    prog.moves.push_back(at(10, 0, 10, 0, 0, 600)); // no motion, no frame
    prog.moves.push_back(at(10, 5, 10, 0, 0, 300));
    SimTrace t = replay(prog, MachineConfig{});
    ASSERT_EQ(t.frames.size(), 3u);
    EXPECT_EQ(t.frames[0].time, 0.0);
    EXPECT_DOUBLE_EQ(t.frames[1].time, 1.0);
    EXPECT_DOUBLE_EQ(t.frames[2].time, 2.0);
    EXPECT_EQ(t.frames[2].index, 3u);
    EXPECT_DOUBLE_EQ(t.frames[1].axis_speeds[0], 600.0);
}

TEST(Replay, NSegmentsGiveNPlusOneFrames) {
    auto job = flat_job();
    SimTrace t = replay(job.program, MachineConfig{});
    std::size_t moving = 0;
    for (std::size_t i = 1; i < job.program.moves.size(); ++i) {
        const auto& a = job.program.moves[i - 1].pose;
        const auto& b = job.program.moves[i].pose;
        moving += a.x != b.x || a.y != b.y || a.z != b.z || a.u != b.u || a.v != b.v || a.e != b.e;
    }
    EXPECT_EQ(t.frames.size(), moving + 1);
    EXPECT_EQ(t.frames.front().time, 0.0);
}

TEST(Replay, TimeIsSumOfSegmentDurations) {
    SurfaceMesh m = hemisphere_mesh();
    jobs::JobParams p;
    p.slice.region = demo::hemisphere_region();
    auto job = jobs::slice_job(m, p, MachineConfig{});
    SimTrace t = replay(job.program, MachineConfig{});
    double sum = 0.0;
    const auto& mv = job.program.moves;
    for (std::size_t i = 1; i < mv.size(); ++i) {
        const auto& a = mv[i - 1].pose;
        const auto& b = mv[i].pose;
        double d = std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) + (b.z - a.z) * (b.z - a.z) +
                             (b.u - a.u) * (b.u - a.u) + (b.v - a.v) * (b.v - a.v) + (b.e - a.e) * (b.e - a.e));
        sum += 60.0 * d / b.f;
    }
    EXPECT_NEAR(t.total_time() / sum, 1.0, 1e-9);
}

TEST(Replay, LargerMarginNeverFlagsLess) {
    auto job = flat_job();
    std::size_t prev = 0;
    for (double margin : {0.0, 0.5, 2.0, 2.2, 3.0, 10.0}) {
        SimTrace t = replay(job.program, MachineConfig{}, nullptr, margin);
        EXPECT_GE(t.flagged_count(), prev) << margin;
        prev = t.flagged_count();
    }
    EXPECT_GT(prev, 0u);
}

TEST(Replay, RejectsMissingFeed) {
    MachineProgram prog;
    prog.moves.push_back(at(0, 0, 10, 0, 0, 600));
    prog.moves.push_back(at(1, 0, 10, 0, 0, 0));
    EXPECT_THROW(replay(prog, MachineConfig{}), Error);
}

TEST(Replay, SpeedAndRangeDetails) {
    MachineProgram prog;
    prog.moves.push_back(at(0, 0, 10, 0, 0, 60000));
    prog.moves.push_back(at(0, 0, 10, 0, 90, 60000));
    prog.moves.push_back(at(0, 0, 10, 95, 90, 3000));
    SimTrace t = replay(prog, MachineConfig{});
    ASSERT_EQ(t.frames.size(), 3u);
    EXPECT_EQ(t.frames[1].offending_axis, "V");
    EXPECT_NE(t.frames[1].detail.find("V speed"), std::string::npos);
    EXPECT_EQ(t.frames[2].offending_axis, "U");
    EXPECT_NE(t.frames[2].detail.find("outside limit"), std::string::npos);
}

TEST(Trace, EmptyIsHeaderOnly) { EXPECT_EQ(export_trace(SimTrace{}), "open5x-trace v1\n"); }

TEST(Trace, OneLinePerFrame) {
    MachineProgram prog;
    prog.moves.push_back(at(0, 0, 10, 0, 0, 600));
    prog.moves.push_back(at(1, 0, 10, 0, 0, 600));
    std::string text = export_trace(replay(prog, MachineConfig{}));
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    auto first = nlohmann::ordered_json::parse(text.substr(text.find('\n') + 1, text.find('\n', 16) - 16));
    std::vector<std::string> keys;
    for (auto& [k, v] : first.items())
        keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"i", "time", "pose", "kind", "axis_speeds", "bed_world_transform", "flags", "offending_axis",
                                              "min_clearance", "bed_clearance", "substrate_clearance", "detail"}));
    EXPECT_TRUE(first["substrate_clearance"].is_null());
}

TEST(Trace, RoundTripIsExact) {
    SurfaceMesh m = hemisphere_mesh();
    jobs::JobParams p;
    p.slice.region = demo::hemisphere_region();
    auto job = jobs::slice_job(m, p, MachineConfig{});
    SimTrace t = replay(job.program, MachineConfig{}, &m);
    std::string text = export_trace(t);
    SimTrace back = read_trace(text);
    ASSERT_EQ(back.frames.size(), t.frames.size());
    for (std::size_t i = 0; i < t.frames.size(); ++i)
        ASSERT_TRUE(back.frames[i] == t.frames[i]) << i;
    EXPECT_EQ(export_trace(back), text);
}

TEST(Trace, ReadErrors) {
    auto code = [](std::string_view text) {
        try {
            read_trace(text);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidParams;
    };
    EXPECT_EQ(code("not a trace\n"), ErrorCode::MalformedTrace);
    EXPECT_EQ(code("open5x-trace v1\n{\"i\":0}\n"), ErrorCode::MalformedTrace);
    EXPECT_EQ(code("open5x-trace v1\n{broken\n"), ErrorCode::MalformedTrace);
    EXPECT_TRUE(read_trace("open5x-trace v1\n").frames.empty());
}

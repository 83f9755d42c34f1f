// open5x command line: slice, postprocess, simulate, check, serve.

#include "open5x/jobs.hpp"
#include "open5x/serve.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace open5x;

namespace {

enum Exit { kOk = 0, kUsage = 2, kViolations = 3, kInternal = 4 };

struct Options {
    std::string input;
    std::string config_path;
    std::string gcode_in;
    std::string output;
    std::string trace;
    std::string region;
    std::optional<double> margin;
    std::string host = "127.0.0.1";
    int port = 8765;
    jobs::JobParams params;
    double print_speed = 0.0;
    double travel_speed = 0.0;
};

void add_params(CLI::App* cmd, Options& o) {
    SliceParams& p = o.params.slice;
    cmd->add_option("--nozzle-diameter", p.nozzle_diameter, "bead width, mm")->capture_default_str();
    cmd->add_option("--layer-height", p.layer_height, "mm")->capture_default_str();
    cmd->add_option("--layer-count", p.layer_count)->capture_default_str();
    cmd->add_option("--travel-height", p.travel_height, "lift along the surface normal, mm")->capture_default_str();
    cmd->add_option("--infill-angle", p.infill_angle, "degrees")->capture_default_str();
    cmd->add_option("--infill-spacing", p.infill_spacing, "mm")->capture_default_str();
    cmd->add_option("--perimeters", p.perimeter_count)->capture_default_str();
    cmd->add_option("--segment-length", p.segment_length, "max sample spacing, mm")->capture_default_str();
    cmd->add_option("--print-speed", o.print_speed, "overrides the config, mm/min");
    cmd->add_option("--travel-speed", o.travel_speed, "overrides the config, mm/min");
    cmd->add_flag("--clamp-speeds", o.params.clamp_speeds, "scale feedrates down to the axis limits");
}

void add_config(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "machine config file (defaults when omitted)");
}

MachineConfig config_of(const Options& o) {
    return o.config_path.empty() ? MachineConfig{} : load_config(o.config_path);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw Error(ErrorCode::InvalidParams, "cli", "cannot write '" + path + "'");
}

void finish_params(CLI::App* cmd, Options& o) {
    if (cmd->count("--print-speed"))
        o.params.print_speed = o.print_speed;
    if (cmd->count("--travel-speed"))
        o.params.travel_speed = o.travel_speed;
    if (!o.region.empty())
        o.params.slice.region = jobs::parse_region(o.region);
}

int report_job(const jobs::JobResult& r, const Options& o, const MachineConfig& c, const SurfaceMesh* substrate) {
    write_file(o.output, r.gcode);
    for (const auto& w : r.warnings)
        std::cerr << "warning: " << w << '\n';
    auto summary = jobs::summary_json(r);
    if (!o.trace.empty()) {
        SimTrace t = jobs::simulate_job(r.gcode, c, substrate, o.margin);
        write_file(o.trace, export_trace(t));
        summary["trace"] = jobs::trace_summary_json(t);
    }
    std::cout << summary.dump(2) << '\n';
    if (!r.violations.empty()) {
        std::cerr << r.violations.size() << " axis limit violation(s); rerun with --clamp-speeds to scale feedrates\n";
        return kViolations;
    }
    return kOk;
}

int run_slice(CLI::App* cmd, Options& o) {
    finish_params(cmd, o);
    MachineConfig c = config_of(o);
    SurfaceMesh mesh = jobs::load_mesh_file(o.input);
    return report_job(jobs::slice_job(mesh, o.params, c), o, c, &mesh);
}

int run_postprocess(CLI::App* cmd, Options& o) {
    finish_params(cmd, o);
    MachineConfig c = config_of(o);
    return report_job(jobs::postprocess_job(jobs::read_file(o.input, "cli"), o.params, c), o, c, nullptr);
}

int run_simulate(Options& o) {
    MachineConfig c = config_of(o);
    std::optional<SurfaceMesh> mesh;
    if (!o.input.empty())
        mesh = jobs::load_mesh_file(o.input);
    SimTrace t = jobs::simulate_job(jobs::read_file(o.gcode_in, "cli"), c, mesh ? &*mesh : nullptr, o.margin);
    write_file(o.output, export_trace(t));
    std::cout << jobs::trace_summary_json(t).dump(2) << '\n';
    return t.flagged_count() ? kViolations : kOk;
}

int run_check(Options& o) {
    MachineConfig c = config_of(o);
    auto r = jobs::check_job(jobs::read_file(o.gcode_in, "cli"), c);
    jobs::Json out = {{"moves", r.parsed.program.moves.size()},
                      {"violations", jobs::violations_json(r.violations, &r.parsed.lines)}};
    std::cout << out.dump(2) << '\n';
    return r.violations.empty() ? kOk : kViolations;
}

int run_serve(Options& o) {
    serve::ServiceState state;
    state.config = config_of(o);
    if (!o.input.empty())
        state.mesh = jobs::load_mesh_file(o.input);
    httplib::Server server;
    serve::install(server, state);
    std::cerr << "open5x serving on http://" << o.host << ':' << o.port << '\n';
    if (!server.listen(o.host, o.port)) {
        std::cerr << "error: cannot listen on " << o.host << ':' << o.port << '\n';
        return kUsage;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"open5x: conformal slicer and XYZUVE post-processor"};
    app.require_subcommand(1);
    Options o;

    auto* slice = app.add_subcommand("slice", "slice an STL substrate region to G-code");
    slice->add_option("--input,-i", o.input, "substrate STL")->required();
    slice->add_option("--output,-o", o.output, "G-code output")->required();
    slice->add_option("--trace", o.trace, "also replay and write a trace");
    slice->add_option("--region", o.region, "XY polygon \"x,y x,y ...\" (default: half the mesh bounds)");
    slice->add_option("--margin", o.margin, "bed safety margin for the trace, mm");
    add_params(slice, o);
    add_config(slice, o);

    auto* post = app.add_subcommand("postprocess", "convert a point-and-normal toolpath to G-code");
    post->add_option("--input,-i", o.input, "toolpath file, one 'x y z i j k' per line")->required();
    post->add_option("--output,-o", o.output, "G-code output")->required();
    post->add_option("--trace", o.trace, "also replay and write a trace");
    post->add_option("--margin", o.margin, "bed safety margin for the trace, mm");
    add_params(post, o);
    add_config(post, o);

    auto* sim = app.add_subcommand("simulate", "replay G-code and write a trace");
    sim->add_option("--gcode,-g", o.gcode_in, "G-code input")->required();
    sim->add_option("--output,-o", o.output, "trace output")->required();
    sim->add_option("--input,-i", o.input, "substrate STL for nozzle-substrate checks");
    sim->add_option("--margin", o.margin, "bed safety margin, mm");
    add_config(sim, o);

    auto* check = app.add_subcommand("check", "report axis speed and range violations");
    check->add_option("--gcode,-g", o.gcode_in, "G-code input")->required();
    add_config(check, o);

    auto* srv = app.add_subcommand("serve", "local HTTP service for the viewer");
    srv->add_option("--input,-i", o.input, "substrate STL served by /mesh and sliced by /slice");
    srv->add_option("--host", o.host, "bind address")->capture_default_str();
    srv->add_option("--port", o.port)->capture_default_str();
    add_config(srv, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*slice)
            return run_slice(slice, o);
        if (*post)
            return run_postprocess(post, o);
        if (*sim)
            return run_simulate(o);
        if (*check)
            return run_check(o);
        return run_serve(o);
    } catch (const jobs::InvariantBreach& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.code()) {
        case ErrorCode::NonUnitNormal:
        case ErrorCode::NonPositiveInput:
        case ErrorCode::ZeroLengthSegment: return kInternal;
        default: return kUsage;
        }
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}

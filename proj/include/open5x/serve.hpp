#pragma once

#include "open5x/jobs.hpp"

// raw G-code posted with a form content type is still accepted whole
#ifndef CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (64 * 1024 * 1024)
#endif
#include <httplib.h>

#include <algorithm>
#include <optional>
#include <string>

// Local HTTP front end over the pipeline jobs.
namespace open5x::serve {

struct ServiceState {
    std::optional<SurfaceMesh> mesh; // read-only after start
    MachineConfig config;
};

namespace detail {

inline void reply(httplib::Response& res, int status, const jobs::Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, jobs::Json{{"error", message}});
}

/// Parses the request body as params. On field errors answers 400 and
/// returns nullopt.
inline std::optional<jobs::JobParams> read_params(const nlohmann::json& body, httplib::Response& res) {
    std::vector<FieldError> errors;
    jobs::JobParams p = jobs::params_from_json(body, errors);
    for (FieldError& e : jobs::validate(p)) {
        // an absent region is filled in from the mesh later
        if (e.field == "region" && p.slice.region.empty())
            continue;
        if (std::none_of(errors.begin(), errors.end(), [&](const FieldError& x) { return x.field == e.field; }))
            errors.push_back(std::move(e));
    }
    if (!errors.empty()) {
        reply(res, 400, jobs::errors_json(errors));
        return std::nullopt;
    }
    return p;
}

inline std::optional<jobs::JobResult> run_slice(const ServiceState& s, const jobs::JobParams& p,
                                                httplib::Response& res) {
    if (!s.mesh) {
        reply_error(res, 422, "no substrate mesh loaded; start serve with --input");
        return std::nullopt;
    }
    try {
        return jobs::slice_job(*s.mesh, p, s.config);
    } catch (const Error& e) {
        reply_error(res, 422, e.what());
    }
    return std::nullopt;
}

} // namespace detail

/// Registers /health, /mesh, /slice and /simulate on `server`.
inline void install(httplib::Server& server, const ServiceState& state) {
    server.Get("/health", [&state](const httplib::Request&, httplib::Response& res) {
        detail::reply(res, 200, {{"status", "ok"}, {"mesh_loaded", state.mesh.has_value()}});
    });

    server.Get("/mesh", [&state](const httplib::Request&, httplib::Response& res) {
        if (!state.mesh)
            return detail::reply_error(res, 404, "no substrate mesh loaded");
        detail::reply(res, 200, jobs::mesh_json(*state.mesh));
    });

    server.Post("/slice", [&state](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
        if (body.is_discarded())
            return detail::reply(res, 400, jobs::errors_json({{"body", "is not valid JSON"}}));
        auto params = detail::read_params(body, res);
        if (!params)
            return;
        auto result = detail::run_slice(state, *params, res);
        if (!result)
            return;
        detail::reply(res, 200, {{"gcode", result->gcode}, {"summary", jobs::summary_json(*result)}});
    });

    // Body: raw G-code text, {"gcode": "..."}, or a params object to slice
    // first. Answers with the trace text.
    server.Post("/simulate", [&state](const httplib::Request& req, httplib::Response& res) {
        const SurfaceMesh* substrate = state.mesh ? &*state.mesh : nullptr;
        std::string gcode;
        auto body = nlohmann::json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
        if (body.is_discarded()) {
            gcode = req.body;
        } else if (body.is_object() && body.contains("gcode")) {
            if (!body["gcode"].is_string())
                return detail::reply(res, 400, jobs::errors_json({{"gcode", "must be a string"}}));
            gcode = body["gcode"].get<std::string>();
        } else {
            auto params = detail::read_params(body, res);
            if (!params)
                return;
            auto result = detail::run_slice(state, *params, res);
            if (!result)
                return;
            gcode = std::move(result->gcode);
        }
        try {
            SimTrace trace = jobs::simulate_job(gcode, state.config, substrate);
            res.status = 200;
            res.set_content(export_trace(trace), "application/x-ndjson");
        } catch (const Error& e) {
            detail::reply_error(res, 422, e.what());
        }
    });
}

} // namespace open5x::serve

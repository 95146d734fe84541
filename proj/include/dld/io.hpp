/// @file io.hpp
/// @brief Run manifests and small export helpers shared by the CLI.

#pragma once

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "dld/flow_oracle.hpp"
#include "dld/tracer.hpp"

namespace dld {

inline constexpr const char* kToolVersion = "0.1.0";

/// Every artifact-producing command writes one manifest next to its outputs:
/// the command, its fully resolved configuration, seeds, paths, tool version
/// and wall-clock. A run is reproducible from the manifest alone.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_clock_sec = 0.0;
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["tool_version"] = kToolVersion;
    j["wall_clock_sec"] = m.wall_clock_sec;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trajectory: cannot open " + path);
    out << "t,x_device,y_device,column\n";
    for (const TrajectoryPoint& p : traj.points)
        out << detail::fmt_full(p.t) << ',' << detail::fmt_full(p.x_device) << ','
            << detail::fmt_full(p.y_device) << ',' << p.column << '\n';
}

inline nlohmann::json dc_result_to_json(const DcResult& dc) {
    nlohmann::json j;
    j["dc"] = dc.dc;
    j["bracket"] = {{"low", dc.bracket_low}, {"high", dc.bracket_high}};
    j["evaluations"] = dc.evaluations;
    j["log"] = nlohmann::json::array();
    for (const DcEvaluation& e : dc.log)
        j["log"].push_back({{"dp", e.dp}, {"mode", mode_name(e.mode)}});
    return j;
}

inline void write_dc_result(const DcResult& dc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dc_result: cannot open " + path);
    out << dc_result_to_json(dc).dump(2) << '\n';
}

}  // namespace dld

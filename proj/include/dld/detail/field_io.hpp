/// @file field_io.hpp
/// @brief CSV + sidecar JSON persistence for flow fields.

#pragma once

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "dld/flow_oracle.hpp"

namespace dld {

inline void write_field(const FlowField& f, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("write_field: cannot open " + csv_path);
    out << "x,y,u,v,p,solid\n";
    for (int j = 0; j <= f.ny; ++j) {
        for (int i = 0; i <= f.nx; ++i) {
            const std::size_t id = f.idx(i, j);
            out << detail::fmt_full(f.x_of(i)) << ',' << detail::fmt_full(f.y_of(j)) << ','
                << detail::fmt_full(f.u[id]) << ',' << detail::fmt_full(f.v[id]) << ','
                << detail::fmt_full(f.p[id]) << ',' << int(f.solid_mask[id]) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_field: write failed for " + csv_path);

    nlohmann::json meta;
    meta["geometry"] = {{"F", f.cell.F}, {"N", f.cell.N}, {"Ds", f.cell.Ds}};
    meta["nx"] = f.nx;
    meta["ny"] = f.ny;
    meta["dp"] = f.dp;
    meta["mu"] = f.mu;
    meta["scales"] = {{"u_scale", f.scale_meta.u_scale},
                      {"p_offset", f.scale_meta.p_offset},
                      {"p_scale", f.scale_meta.p_scale}};
    meta["residual"] = f.residual;
    meta["iterations"] = f.iterations;
    meta["channel_walls"] = f.channel_walls;
    meta["tilted"] = f.tilted;
    meta["nondimensional"] = f.nondimensional;
    std::ofstream mout(field_meta_path(csv_path));
    if (!mout) throw std::runtime_error("write_field: cannot open " + field_meta_path(csv_path));
    mout << meta.dump(2) << '\n';
}

inline FlowField read_field(const std::string& csv_path) {
    std::ifstream min(field_meta_path(csv_path));
    if (!min)
        throw std::runtime_error("read_field: missing sidecar " + field_meta_path(csv_path));
    nlohmann::json meta;
    try {
        min >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("read_field: bad sidecar JSON: " + std::string(e.what()));
    }

    FlowField f;
    f.cell = make_cell(meta.at("geometry").at("F").get<double>(),
                       meta.at("geometry").at("N").get<int>(),
                       meta.at("geometry").at("Ds").get<double>());
    f.nx = meta.at("nx").get<int>();
    f.ny = meta.at("ny").get<int>();
    f.dp = meta.at("dp").get<double>();
    f.mu = meta.at("mu").get<double>();
    f.scale_meta.u_scale = meta.at("scales").at("u_scale").get<double>();
    f.scale_meta.p_offset = meta.at("scales").at("p_offset").get<double>();
    f.scale_meta.p_scale = meta.at("scales").at("p_scale").get<double>();
    f.residual = meta.at("residual").get<double>();
    f.iterations = meta.at("iterations").get<long>();
    f.channel_walls = meta.at("channel_walls").get<bool>();
    f.tilted = meta.at("tilted").get<bool>();
    f.nondimensional = meta.at("nondimensional").get<bool>();

    const std::size_t nvert = static_cast<std::size_t>(f.nx + 1) * (f.ny + 1);
    f.u.assign(nvert, 0.0);
    f.v.assign(nvert, 0.0);
    f.p.assign(nvert, 0.0);
    f.solid_mask.assign(nvert, 0);

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("read_field: cannot open " + csv_path);
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line))
        throw std::runtime_error(csv_path + ":1: empty field file");
    ++lineno;
    if (line != "x,y,u,v,p,solid")
        throw std::runtime_error(csv_path + ":1: unexpected header '" + line + "'");

    std::size_t count = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (count >= nvert)
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                     ": more rows than nx/ny allow");
        double vals[5];
        int solid = 0;
        std::stringstream ss(line);
        std::string tok;
        for (int k = 0; k < 6; ++k) {
            if (!std::getline(ss, tok, ','))
                throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                         ": expected 6 comma-separated fields");
            try {
                if (k < 5)
                    vals[k] = std::stod(tok);
                else
                    solid = std::stoi(tok);
            } catch (const std::exception&) {
                throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                         ": cannot parse '" + tok + "'");
            }
        }
        f.u[count] = vals[2];
        f.v[count] = vals[3];
        f.p[count] = vals[4];
        f.solid_mask[count] = static_cast<std::uint8_t>(solid != 0);
        ++count;
    }
    if (count != nvert)
        throw std::runtime_error(csv_path + ": expected " + std::to_string(nvert) +
                                 " rows, found " + std::to_string(count));
    return f;
}

}  // namespace dld

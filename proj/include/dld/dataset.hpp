/// @file dataset.hpp
/// @brief Training/validation datasets from flow fields: random interior
///        sampling, boundary point sets for the soft-BC loss, CSV/JSON
///        persistence with bit-exact round trips.

#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dld/flow_oracle.hpp"
#include "dld/geometry.hpp"
#include "dld/rng.hpp"

namespace dld {

struct SampleRecord {
    double x, y;
    double F;
    int N;
    double u, v, p;
};

struct BoundaryPoint {
    double x, y;
};

struct BoundarySets {
    std::vector<BoundaryPoint> wall_points;
    std::vector<BoundaryPoint> inlet_points;
    std::vector<BoundaryPoint> outlet_points;
};

struct GeometryRef {
    double F;
    int N;
    double Ds;
    bool tilted;
};

struct DatasetMeta {
    double dp = 0.1;
    double u_scale = 1.0;
    std::uint64_t seed = 0;
    std::vector<GeometryRef> geometries;
};

struct Dataset {
    std::vector<SampleRecord> records;
    std::vector<BoundarySets> boundary;  ///< parallel to meta.geometries
    DatasetMeta meta;
};

// ============================================================================
// Sampling
// ============================================================================

/// Exactly n records uniform over the fluid region, reproducible from seed.
/// Field values come from bilinear interpolation; rejection sampling retries
/// solid hits.
inline std::vector<SampleRecord> sample_points(const FlowField& field, long n,
                                               std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_points: n must be >= 1");
    Rng rng(seed);
    std::vector<SampleRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    const UnitCellGeometry& cell = field.cell;
    while (static_cast<long>(out.size()) < n) {
        const double x = rng.uniform(0.0, cell.Dx());
        const double y = rng.uniform(0.0, cell.Dy());
        if (lattice_is_solid(cell, x, y, field.tilted)) continue;
        const FieldSample s = interp_field_local(field, x, y);
        out.push_back({x, y, cell.F, cell.N, s.u, s.v, s.p});
    }
    return out;
}

/// Wall points exactly on the post arcs (uniform in angle over the arc
/// portions inside the cell), inlet/outlet points uniform in y over the
/// fluid segments of x = 0 and x = Dx.
inline BoundarySets boundary_sets(const UnitCellGeometry& cell, long n_wall, long n_io,
                                  std::uint64_t seed, bool tilted = true) {
    if (n_wall < 1 || n_io < 1)
        throw std::invalid_argument("boundary_sets: counts must be >= 1");
    Rng rng(seed);
    BoundarySets b;
    const double r = 0.5 * cell.D0;
    const double Dx = cell.Dx(), Dy = cell.Dy();
    const double shift = tilted ? cell.epsilon : 0.0;
    const PostCenter posts[4] = {{0.0, 0.0}, {0.0, Dy}, {Dx, shift}, {Dx, Dy + shift}};

    b.wall_points.reserve(static_cast<std::size_t>(n_wall));
    while (static_cast<long>(b.wall_points.size()) < n_wall) {
        const PostCenter& c = posts[rng.below(4)];
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double x = c.x + r * std::cos(theta);
        const double y = c.y + r * std::sin(theta);
        if (x < 0.0 || x > Dx || y < 0.0 || y > Dy) continue;
        b.wall_points.push_back({x, y});
    }

    auto io_column = [&](double x_col, std::vector<BoundaryPoint>& dst) {
        dst.reserve(static_cast<std::size_t>(n_io));
        while (static_cast<long>(dst.size()) < n_io) {
            const double y = rng.uniform(0.0, Dy);
            if (lattice_is_solid(cell, x_col, y, tilted)) continue;
            dst.push_back({x_col, y});
        }
    };
    io_column(0.0, b.inlet_points);
    io_column(Dx, b.outlet_points);
    return b;
}

/// Assemble a dataset from solved fields: per-field interior samples plus
/// boundary sets, with one shared velocity scale u_scale = max |u|,|v| over
/// all member fields.
inline Dataset build_dataset(const std::vector<FlowField>& fields, long n_samples, long n_wall,
                             long n_io, std::uint64_t seed) {
    if (fields.empty()) throw std::invalid_argument("build_dataset: no fields");
    Dataset ds;
    ds.meta.seed = seed;
    ds.meta.dp = fields.front().dp;
    double u_scale = 0.0;
    for (const FlowField& f : fields) u_scale = std::max(u_scale, max_abs_velocity(f));
    if (u_scale == 0.0) u_scale = 1.0;
    ds.meta.u_scale = u_scale;

    for (std::size_t g = 0; g < fields.size(); ++g) {
        const FlowField& f = fields[g];
        ds.meta.geometries.push_back({f.cell.F, f.cell.N, f.cell.Ds, f.tilted});
        auto recs = sample_points(f, n_samples, seed + 1000003 * (g + 1));
        for (SampleRecord& r : recs) {
            r.u /= u_scale;
            r.v /= u_scale;
            ds.records.push_back(r);
        }
        ds.boundary.push_back(
            boundary_sets(f.cell, n_wall, n_io, seed + 2000003 * (g + 1), f.tilted));
    }
    return ds;
}

// ============================================================================
// Persistence
// ============================================================================

inline std::string dataset_meta_path(const std::string& csv_path) {
    return csv_path + ".meta.json";
}

inline void write_dataset(const Dataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + csv_path);
    out << "x,y,F,N,u,v,p\n";
    for (const SampleRecord& r : ds.records) {
        out << detail::fmt_full(r.x) << ',' << detail::fmt_full(r.y) << ','
            << detail::fmt_full(r.F) << ',' << r.N << ',' << detail::fmt_full(r.u) << ','
            << detail::fmt_full(r.v) << ',' << detail::fmt_full(r.p) << '\n';
    }
    if (!out) throw std::runtime_error("write_dataset: write failed for " + csv_path);

    nlohmann::json meta;
    meta["dp"] = ds.meta.dp;
    meta["u_scale"] = ds.meta.u_scale;
    meta["seed"] = ds.meta.seed;
    meta["geometries"] = nlohmann::json::array();
    meta["boundary"] = nlohmann::json::array();
    for (std::size_t g = 0; g < ds.meta.geometries.size(); ++g) {
        const GeometryRef& gr = ds.meta.geometries[g];
        meta["geometries"].push_back(
            {{"F", gr.F}, {"N", gr.N}, {"Ds", gr.Ds}, {"tilted", gr.tilted}});
        auto pts = [](const std::vector<BoundaryPoint>& v) {
            nlohmann::json a = nlohmann::json::array();
            for (const BoundaryPoint& p : v) a.push_back({p.x, p.y});
            return a;
        };
        const BoundarySets& b = ds.boundary[g];
        meta["boundary"].push_back({{"wall", pts(b.wall_points)},
                                    {"inlet", pts(b.inlet_points)},
                                    {"outlet", pts(b.outlet_points)}});
    }
    std::ofstream mout(dataset_meta_path(csv_path));
    if (!mout)
        throw std::runtime_error("write_dataset: cannot open " + dataset_meta_path(csv_path));
    mout << meta.dump(2) << '\n';
}

inline Dataset read_dataset(const std::string& csv_path) {
    std::ifstream min(dataset_meta_path(csv_path));
    if (!min)
        throw std::runtime_error("read_dataset: missing sidecar " + dataset_meta_path(csv_path));
    nlohmann::json meta;
    try {
        min >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("read_dataset: bad sidecar JSON: " + std::string(e.what()));
    }

    Dataset ds;
    ds.meta.dp = meta.at("dp").get<double>();
    ds.meta.u_scale = meta.at("u_scale").get<double>();
    ds.meta.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& g : meta.at("geometries"))
        ds.meta.geometries.push_back({g.at("F").get<double>(), g.at("N").get<int>(),
                                      g.at("Ds").get<double>(), g.at("tilted").get<bool>()});
    for (const auto& b : meta.at("boundary")) {
        BoundarySets bs;
        auto pts = [](const nlohmann::json& a, std::vector<BoundaryPoint>& v) {
            for (const auto& p : a) v.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        };
        pts(b.at("wall"), bs.wall_points);
        pts(b.at("inlet"), bs.inlet_points);
        pts(b.at("outlet"), bs.outlet_points);
        ds.boundary.push_back(std::move(bs));
    }

    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + csv_path);
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw std::runtime_error(csv_path + ":1: empty dataset file");
    ++lineno;
    if (line != "x,y,F,N,u,v,p")
        throw std::runtime_error(csv_path + ":1: unexpected header '" + line + "'");

    std::set<std::tuple<double, int, double, double>> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        double vals[7];
        for (int k = 0; k < 7; ++k) {
            if (!std::getline(ss, tok, ','))
                throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                         ": expected 7 comma-separated fields");
            try {
                vals[k] = std::stod(tok);
            } catch (const std::exception&) {
                throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                         ": cannot parse '" + tok + "'");
            }
        }
        SampleRecord r{vals[0], vals[1], vals[2], static_cast<int>(vals[3]),
                       vals[4], vals[5], vals[6]};
        for (double v : {r.x, r.y, r.F, r.u, r.v, r.p})
            if (!std::isfinite(v))
                throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                         ": non-finite value");
        // locate the geometry to validate the fluid-region invariant
        bool found = false;
        for (const GeometryRef& g : ds.meta.geometries) {
            if (g.F == r.F && g.N == r.N) {
                const UnitCellGeometry cell = make_cell(g.F, g.N, g.Ds);
                if (lattice_is_solid(cell, r.x, r.y, g.tilted))
                    throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                             ": record lies inside a post");
                found = true;
                break;
            }
        }
        if (!found)
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                     ": record references unknown geometry (F=" +
                                     std::to_string(r.F) + ", N=" + std::to_string(r.N) + ")");
        if (!seen.insert({r.F, r.N, r.x, r.y}).second)
            throw std::runtime_error(csv_path + ":" + std::to_string(lineno) +
                                     ": duplicate (geometry, x, y) record");
        ds.records.push_back(r);
    }
    return ds;
}

}  // namespace dld

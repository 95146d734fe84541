/// @file metrics.hpp
/// @brief Evaluation: R-squared per field, critical-diameter percent error,
///        boundary-periodicity scans, error maps, and sweep reports in the
///        per-F table layout.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dld/flow_oracle.hpp"
#include "dld/surrogate.hpp"
#include "dld/tracer.hpp"

namespace dld {

// ============================================================================
// Scalar metrics
// ============================================================================

/// 1 - SS_res / SS_tot. Perfect fit gives 1; predicting the mean gives 0.
inline double r2(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size() || truth.empty())
        throw std::invalid_argument("r2: lists must be nonempty and of equal length");
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0)
        throw std::domain_error("r2: truth is constant, variance undefined");
    return 1.0 - ss_res / ss_tot;
}

inline double dc_percent_error(double dc_true, double dc_pred) {
    if (dc_true == 0.0) throw std::domain_error("dc_percent_error: dc_true must be nonzero");
    return std::abs(dc_true - dc_pred) / std::abs(dc_true) * 100.0;
}

// ============================================================================
// Periodicity scan
// ============================================================================

struct PeriodicityScan {
    double avg_u = 0, avg_v = 0, avg_p = 0;
    double max_u = 0, max_v = 0, max_p = 0;
};

/// |predict(x, 0) - predict(x, Dy)| per field at n_x uniform x probes.
/// A periodic_layer model returns exactly zero everywhere.
inline PeriodicityScan periodicity_scan(const SurrogateModel& model,
                                        const UnitCellGeometry& cell, int n_x = 200) {
    if (n_x < 2) throw std::invalid_argument("periodicity_scan: need at least 2 probes");
    PeriodicityScan s;
    for (int i = 0; i < n_x; ++i) {
        const double x = cell.Dx() * static_cast<double>(i) / (n_x - 1);
        const Prediction a = predict(model, x, 0.0, cell.F, cell.N);
        const Prediction b = predict(model, x, cell.Dy(), cell.F, cell.N);
        const double du = std::abs(a.u - b.u), dv = std::abs(a.v - b.v),
                     dp2 = std::abs(a.p - b.p);
        s.avg_u += du;
        s.avg_v += dv;
        s.avg_p += dp2;
        s.max_u = std::max(s.max_u, du);
        s.max_v = std::max(s.max_v, dv);
        s.max_p = std::max(s.max_p, dp2);
    }
    s.avg_u /= n_x;
    s.avg_v /= n_x;
    s.avg_p /= n_x;
    return s;
}

// ============================================================================
// Field error maps
// ============================================================================

struct FieldErrorMap {
    int nx = 0, ny = 0;
    std::vector<double> err_u, err_v, err_p;  ///< |truth - prediction| per vertex
    std::vector<std::uint8_t> excluded;       ///< solid vertices, not compared
};

/// Per-vertex absolute differences on fluid nodes. The truth field must be
/// expressed in the model's units (velocities divided by norms.u_scale).
inline FieldErrorMap field_error_map(const FlowField& truth, const SurrogateModel& model) {
    const std::size_t n = truth.u.size();
    FieldErrorMap m;
    m.nx = truth.nx;
    m.ny = truth.ny;
    m.err_u.assign(n, 0.0);
    m.err_v.assign(n, 0.0);
    m.err_p.assign(n, 0.0);
    m.excluded.assign(n, 0);
    for (int j = 0; j <= truth.ny; ++j) {
        for (int i = 0; i <= truth.nx; ++i) {
            const std::size_t id = truth.idx(i, j);
            if (truth.solid_mask[id]) {
                m.excluded[id] = 1;
                continue;
            }
            const Prediction pr =
                predict(model, truth.x_of(i), truth.y_of(j), truth.cell.F, truth.cell.N);
            m.err_u[id] = std::abs(truth.u[id] - pr.u);
            m.err_v[id] = std::abs(truth.v[id] - pr.v);
            m.err_p[id] = std::abs(truth.p[id] - pr.p);
        }
    }
    return m;
}

inline void write_error_map(const FieldErrorMap& m, const FlowField& truth,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_error_map: cannot open " + path);
    out << "x,y,err_u,err_v,err_p,excluded\n";
    for (int j = 0; j <= m.ny; ++j)
        for (int i = 0; i <= m.nx; ++i) {
            const std::size_t id = truth.idx(i, j);
            out << detail::fmt_full(truth.x_of(i)) << ',' << detail::fmt_full(truth.y_of(j))
                << ',' << detail::fmt_full(m.err_u[id]) << ',' << detail::fmt_full(m.err_v[id])
                << ',' << detail::fmt_full(m.err_p[id]) << ',' << int(m.excluded[id]) << '\n';
        }
}

// ============================================================================
// Sweep reports
// ============================================================================

struct GeometryEval {
    double F = 0;
    int N = 0;
    double r2_u = 0, r2_v = 0, r2_p = 0;
    double dc_true = 0, dc_pred = 0, dc_error_pct = 0;
    bool skipped = false;
    std::string skip_reason;
};

struct EvalReport {
    std::string model_id;
    std::string dataset_id;
    std::vector<GeometryEval> per_geometry;
    // per-F rows averaged over N, in the table layout the tables use
    std::vector<double> table_F;
    std::vector<double> table_dc_error, table_r2_u, table_r2_v, table_r2_p;
    double mean_dc_error = 0, mean_r2_u = 0, mean_r2_v = 0, mean_r2_p = 0;
};

/// Evaluate a model against oracle fields: per-geometry field R-squared and
/// critical-diameter percent error, aggregated by F averaged over N.
/// Fields must be raw-velocity solves; the model's u_scale is applied here.
inline EvalReport sweep_report(const std::vector<FlowField>& fields, const SurrogateModel& model,
                               double dc_tol = 1e-4, const TraceOptions& trace_opts = {}) {
    EvalReport rep;
    for (const FlowField& f : fields) {
        GeometryEval ge;
        ge.F = f.cell.F;
        ge.N = f.cell.N;
        try {
            std::vector<double> tu, tv, tp, pu, pv, pp;
            for (int j = 0; j <= f.ny; ++j)
                for (int i = 0; i <= f.nx; ++i) {
                    const std::size_t id = f.idx(i, j);
                    if (f.solid_mask[id]) continue;
                    const Prediction pr =
                        predict(model, f.x_of(i), f.y_of(j), f.cell.F, f.cell.N);
                    tu.push_back(f.u[id] / model.norms.u_scale);
                    tv.push_back(f.v[id] / model.norms.u_scale);
                    tp.push_back(f.p[id]);
                    pu.push_back(pr.u);
                    pv.push_back(pr.v);
                    pp.push_back(pr.p);
                }
            ge.r2_u = r2(tu, pu);
            ge.r2_v = r2(tv, pv);
            ge.r2_p = r2(tp, pp);

            GridFlowSource truth_src(f);
            ge.dc_true = critical_diameter(truth_src, f.cell, dc_tol, trace_opts).dc;
            SurrogateFlowSource model_src(model, f.cell, f.tilted,
                                          std::min(f.dx(), f.dy()));
            ge.dc_pred = critical_diameter(model_src, f.cell, dc_tol, trace_opts).dc;
            ge.dc_error_pct = dc_percent_error(ge.dc_true, ge.dc_pred);
        } catch (const std::exception& e) {
            ge.skipped = true;
            ge.skip_reason = e.what();
        }
        rep.per_geometry.push_back(std::move(ge));
    }

    // aggregate by F (averaged over N), skipped geometries excluded
    std::map<double, std::vector<const GeometryEval*>> by_f;
    for (const GeometryEval& ge : rep.per_geometry)
        if (!ge.skipped) by_f[ge.F].push_back(&ge);
    double sum_dc = 0, sum_u = 0, sum_v = 0, sum_p = 0;
    long count = 0;
    for (const auto& [F, rows] : by_f) {
        double dc = 0, u = 0, v = 0, p = 0;
        for (const GeometryEval* ge : rows) {
            dc += ge->dc_error_pct;
            u += ge->r2_u;
            v += ge->r2_v;
            p += ge->r2_p;
            sum_dc += ge->dc_error_pct;
            sum_u += ge->r2_u;
            sum_v += ge->r2_v;
            sum_p += ge->r2_p;
            ++count;
        }
        const double inv = 1.0 / static_cast<double>(rows.size());
        rep.table_F.push_back(F);
        rep.table_dc_error.push_back(dc * inv);
        rep.table_r2_u.push_back(u * inv);
        rep.table_r2_v.push_back(v * inv);
        rep.table_r2_p.push_back(p * inv);
    }
    if (count > 0) {
        rep.mean_dc_error = sum_dc / count;
        rep.mean_r2_u = sum_u / count;
        rep.mean_r2_v = sum_v / count;
        rep.mean_r2_p = sum_p / count;
    }
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["model_id"] = rep.model_id;
    j["dataset_id"] = rep.dataset_id;
    j["per_geometry"] = nlohmann::json::array();
    for (const GeometryEval& ge : rep.per_geometry) {
        nlohmann::json r = {{"F", ge.F}, {"N", ge.N}, {"skipped", ge.skipped}};
        if (ge.skipped) {
            r["skip_reason"] = ge.skip_reason;
        } else {
            r["r2_u"] = ge.r2_u;
            r["r2_v"] = ge.r2_v;
            r["r2_p"] = ge.r2_p;
            r["dc_true"] = ge.dc_true;
            r["dc_pred"] = ge.dc_pred;
            r["dc_error_pct"] = ge.dc_error_pct;
        }
        j["per_geometry"].push_back(std::move(r));
    }
    j["table"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.table_F.size(); ++i)
        j["table"].push_back({{"F", rep.table_F[i]},
                              {"dc_error_pct", rep.table_dc_error[i]},
                              {"r2_u", rep.table_r2_u[i]},
                              {"r2_v", rep.table_r2_v[i]},
                              {"r2_p", rep.table_r2_p[i]}});
    j["total"] = {{"dc_error_pct", rep.mean_dc_error},
                  {"r2_u", rep.mean_r2_u},
                  {"r2_v", rep.mean_r2_v},
                  {"r2_p", rep.mean_r2_p}};
    return j;
}

inline void write_report(const EvalReport& rep, const std::string& json_path,
                         const std::string& csv_path) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("write_report: cannot open " + json_path);
    out << report_to_json(rep).dump(2) << '\n';

    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("write_report: cannot open " + csv_path);
    csv << "F,avg_dc_error_pct,avg_r2_u,avg_r2_v,avg_r2_p\n";
    for (std::size_t i = 0; i < rep.table_F.size(); ++i)
        csv << detail::fmt_full(rep.table_F[i]) << ',' << detail::fmt_full(rep.table_dc_error[i])
            << ',' << detail::fmt_full(rep.table_r2_u[i]) << ','
            << detail::fmt_full(rep.table_r2_v[i]) << ','
            << detail::fmt_full(rep.table_r2_p[i]) << '\n';
    csv << "total," << detail::fmt_full(rep.mean_dc_error) << ','
        << detail::fmt_full(rep.mean_r2_u) << ',' << detail::fmt_full(rep.mean_r2_v) << ','
        << detail::fmt_full(rep.mean_r2_p) << '\n';
}

}  // namespace dld

/// @file dld_main.cpp
/// @brief Command-line entry point: gen, sample, train, eval, dc, trace,
///        periodicity, sweep. Every artifact-producing command writes a
///        manifest next to its outputs. Exit codes: 2 usage, 3 numerical
///        failure, 4 I/O.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dld/dataset.hpp"
#include "dld/flow_oracle.hpp"
#include "dld/geometry.hpp"
#include "dld/io.hpp"
#include "dld/metrics.hpp"
#include "dld/surrogate.hpp"
#include "dld/tracer.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    double f = 0.5, ds = 0.4, dp = 0.1, mu = 1.0, tol = 1e-8;
    int n = 10, grid = 256;
    long max_iters = 500000;
    bool untilted = false, channel = false, no_posts = false;
    std::string out;
};

int run_gen(const GenArgs& a) {
    Timer timer;
    const dld::UnitCellGeometry cell = dld::make_cell(a.f, a.n, a.ds);
    dld::SolveOptions opt;
    opt.nx = opt.ny = a.grid;
    opt.dp = a.dp;
    opt.mu = a.mu;
    opt.tol = a.tol;
    opt.max_iters = a.max_iters;
    opt.tilted = !a.untilted;
    opt.channel_walls = a.channel;
    opt.include_posts = !a.no_posts;
    const dld::FlowField raw = dld::solve_steady(cell, opt);
    const dld::FlowField nd = dld::nondimensionalize(raw, a.dp, 1.0);
    dld::write_field(nd, a.out);

    dld::RunManifest m;
    m.command = "gen";
    m.config = {{"f", a.f},       {"n", a.n},           {"ds", a.ds},
                {"dp", a.dp},     {"mu", a.mu},         {"grid", a.grid},
                {"tol", a.tol},   {"max_iters", a.max_iters},
                {"untilted", a.untilted}, {"channel", a.channel},
                {"no_posts", a.no_posts}, {"out", a.out}};
    m.outputs = {a.out, dld::field_meta_path(a.out)};
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out + ".manifest.json");
    std::cout << "wrote " << a.out << " (grid " << nd.nx << "x" << nd.ny << ", residual "
              << nd.residual << ", iterations " << nd.iterations << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleArgs {
    std::string fields;  // comma-separated field CSVs
    long n_samples = 1000, n_wall = 200, n_io = 100;
    std::uint64_t seed = 0;
    std::string out;
};

int run_sample(const SampleArgs& a) {
    Timer timer;
    const std::vector<std::string> paths = split_list(a.fields);
    if (paths.empty()) throw CLI::ValidationError("--fields", "no field files given");
    std::vector<dld::FlowField> fields;
    for (const std::string& p : paths) fields.push_back(dld::read_field(p));
    const dld::Dataset ds =
        dld::build_dataset(fields, a.n_samples, a.n_wall, a.n_io, a.seed);
    dld::write_dataset(ds, a.out);

    dld::RunManifest m;
    m.command = "sample";
    m.config = {{"fields", a.fields},   {"n_samples", a.n_samples}, {"n_wall", a.n_wall},
                {"n_io", a.n_io},       {"seed", a.seed},           {"out", a.out}};
    m.inputs = paths;
    m.outputs = {a.out, dld::dataset_meta_path(a.out)};
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out + ".manifest.json");
    std::cout << "wrote " << a.out << " (" << ds.records.size() << " records, "
              << ds.meta.geometries.size() << " geometries, u_scale " << ds.meta.u_scale
              << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data, variant = "periodic", out, history;
    long epochs = 200, batch = 2000;
    double lr0 = 1e-3;
    std::uint64_t seed = 0;
    bool paper_scale = false;
};

int run_train(const TrainArgs& a) {
    Timer timer;
    const dld::Dataset ds = dld::read_dataset(a.data);
    dld::Variant variant;
    if (a.variant == "periodic")
        variant = dld::Variant::periodic_layer;
    else if (a.variant == "soft")
        variant = dld::Variant::soft_periodic;
    else if (a.variant == "baseline")
        variant = dld::Variant::baseline;
    else
        throw CLI::ValidationError("--variant", "must be periodic, soft or baseline");

    dld::TrainConfig cfg;
    cfg.epochs = a.paper_scale ? 1000 : a.epochs;
    cfg.batch = a.paper_scale ? 2000 : a.batch;
    cfg.lr0 = a.lr0;
    cfg.seed = a.seed;
    cfg.dp = ds.meta.dp;
    cfg.batch = std::min<long>(cfg.batch, static_cast<long>(ds.records.size()));

    dld::TrainHistory hist;
    const dld::SurrogateModel model = dld::train(ds, cfg, variant, &hist);
    dld::save_model(model, a.out);
    if (!a.history.empty()) dld::write_history(hist, a.history);

    dld::RunManifest m;
    m.command = "train";
    m.config = {{"data", a.data},     {"variant", a.variant}, {"epochs", cfg.epochs},
                {"batch", cfg.batch}, {"lr0", cfg.lr0},       {"seed", a.seed},
                {"paper_scale", a.paper_scale}, {"out", a.out}, {"history", a.history}};
    m.inputs = {a.data};
    m.outputs = {a.out};
    if (!a.history.empty()) m.outputs.push_back(a.history);
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out + ".manifest.json");
    std::cout << "trained " << dld::variant_name(variant) << ": total loss "
              << hist.front().total << " -> " << hist.back().total << " over " << cfg.epochs
              << " epochs\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string model, field, out, error_map;
};

int run_eval(const EvalArgs& a) {
    Timer timer;
    const dld::SurrogateModel model = dld::load_model(a.model);
    const dld::FlowField field = dld::read_field(a.field);

    std::vector<double> tu, tv, tp, pu, pv, pp;
    for (int j = 0; j <= field.ny; ++j)
        for (int i = 0; i <= field.nx; ++i) {
            const std::size_t id = field.idx(i, j);
            if (field.solid_mask[id]) continue;
            const dld::Prediction pr = dld::predict(model, field.x_of(i), field.y_of(j),
                                                    field.cell.F, field.cell.N);
            tu.push_back(field.u[id] / model.norms.u_scale);
            tv.push_back(field.v[id] / model.norms.u_scale);
            tp.push_back(field.p[id]);
            pu.push_back(pr.u);
            pv.push_back(pr.v);
            pp.push_back(pr.p);
        }
    nlohmann::json j;
    j["field"] = a.field;
    j["model"] = a.model;
    j["r2"] = {{"u", dld::r2(tu, pu)}, {"v", dld::r2(tv, pv)}, {"p", dld::r2(tp, pp)}};
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("eval: cannot open " + a.out);
    out << j.dump(2) << '\n';

    if (!a.error_map.empty()) {
        dld::FlowField scaled = field;
        for (std::size_t k = 0; k < scaled.u.size(); ++k) {
            scaled.u[k] /= model.norms.u_scale;
            scaled.v[k] /= model.norms.u_scale;
        }
        const dld::FieldErrorMap em = dld::field_error_map(scaled, model);
        dld::write_error_map(em, scaled, a.error_map);
    }

    dld::RunManifest m;
    m.command = "eval";
    m.config = {{"model", a.model}, {"field", a.field}, {"out", a.out},
                {"error_map", a.error_map}};
    m.inputs = {a.model, a.field};
    m.outputs = {a.out};
    if (!a.error_map.empty()) m.outputs.push_back(a.error_map);
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out + ".manifest.json");
    std::cout << "r2: u=" << j["r2"]["u"] << " v=" << j["r2"]["v"] << " p=" << j["r2"]["p"]
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// dc / trace
// ---------------------------------------------------------------------------

struct SourceArgs {
    std::string model, field;
    double f = 0.0;
    int n = 0;
};

std::unique_ptr<dld::FlowSource> open_source(const SourceArgs& a, dld::UnitCellGeometry& cell,
                                             std::vector<dld::FlowField>& field_keep,
                                             dld::SurrogateModel& model_keep) {
    if (!a.field.empty()) {
        field_keep.push_back(dld::read_field(a.field));
        cell = field_keep.back().cell;
        return std::make_unique<dld::GridFlowSource>(field_keep.back());
    }
    if (a.model.empty())
        throw CLI::ValidationError("--model/--field", "exactly one source is required");
    if (!(a.f > 0.0) || a.n < 1)
        throw CLI::ValidationError("--f/--n", "geometry parameters required with --model");
    model_keep = dld::load_model(a.model);
    cell = dld::make_cell(a.f, a.n, model_keep.Ds);
    return std::make_unique<dld::SurrogateFlowSource>(model_keep, cell);
}

struct DcArgs {
    SourceArgs src;
    double tol = 1e-4;
    std::string out;
};

int run_dc(const DcArgs& a) {
    Timer timer;
    dld::UnitCellGeometry cell;
    std::vector<dld::FlowField> keep;
    dld::SurrogateModel mkeep;
    auto src = open_source(a.src, cell, keep, mkeep);
    const dld::DcResult dc = dld::critical_diameter(*src, cell, a.tol);
    if (!a.out.empty()) {
        dld::write_dc_result(dc, a.out);
        dld::RunManifest m;
        m.command = "dc";
        m.config = {{"model", a.src.model}, {"field", a.src.field}, {"f", cell.F},
                    {"n", cell.N},          {"tol", a.tol},         {"out", a.out}};
        m.inputs = {a.src.model.empty() ? a.src.field : a.src.model};
        m.outputs = {a.out};
        m.wall_clock_sec = timer.seconds();
        dld::write_manifest(m, a.out + ".manifest.json");
    }
    std::cout << "dc = " << dc.dc << " (bracket [" << dc.bracket_low << ", " << dc.bracket_high
              << "], " << dc.evaluations << " evaluations)\n";
    return 0;
}

struct TraceArgs {
    SourceArgs src;
    double dp_particle = 0.05;
    int stride = 10;
    std::string out;
};

int run_trace(const TraceArgs& a) {
    Timer timer;
    dld::UnitCellGeometry cell;
    std::vector<dld::FlowField> keep;
    dld::SurrogateModel mkeep;
    auto src = open_source(a.src, cell, keep, mkeep);
    dld::TraceOptions opts;
    opts.record_points = true;
    opts.record_stride = a.stride;
    const dld::Trajectory traj = dld::trace_particle(*src, cell, a.dp_particle, opts);
    dld::write_trajectory(traj, a.out);

    dld::RunManifest m;
    m.command = "trace";
    m.config = {{"model", a.src.model}, {"field", a.src.field},  {"f", cell.F},
                {"n", cell.N},          {"dp", a.dp_particle},   {"stride", a.stride},
                {"out", a.out}};
    m.inputs = {a.src.model.empty() ? a.src.field : a.src.model};
    m.outputs = {a.out};
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out + ".manifest.json");
    std::cout << "mode = " << dld::mode_name(traj.mode)
              << ", device dy = " << traj.delta_y_device << ", " << traj.points.size()
              << " points\n";
    return 0;
}

// ---------------------------------------------------------------------------
// periodicity / sweep
// ---------------------------------------------------------------------------

struct PeriodicityArgs {
    std::string model, out;
    double f = 0.5;
    int n = 10, probes = 200;
};

int run_periodicity(const PeriodicityArgs& a) {
    Timer timer;
    const dld::SurrogateModel model = dld::load_model(a.model);
    const dld::UnitCellGeometry cell = dld::make_cell(a.f, a.n, model.Ds);
    const dld::PeriodicityScan s = dld::periodicity_scan(model, cell, a.probes);
    nlohmann::json j;
    j["model"] = a.model;
    j["F"] = a.f;
    j["N"] = a.n;
    j["probes"] = a.probes;
    j["avg"] = {{"u", s.avg_u}, {"v", s.avg_v}, {"p", s.avg_p}};
    j["max"] = {{"u", s.max_u}, {"v", s.max_v}, {"p", s.max_p}};
    if (!a.out.empty()) {
        std::ofstream out(a.out);
        if (!out) throw std::runtime_error("periodicity: cannot open " + a.out);
        out << j.dump(2) << '\n';
        dld::RunManifest m;
        m.command = "periodicity";
        m.config = {{"model", a.model}, {"f", a.f}, {"n", a.n}, {"probes", a.probes},
                    {"out", a.out}};
        m.inputs = {a.model};
        m.outputs = {a.out};
        m.wall_clock_sec = timer.seconds();
        dld::write_manifest(m, a.out + ".manifest.json");
    }
    std::cout << j["avg"].dump() << " max " << j["max"].dump() << "\n";
    return 0;
}

struct SweepArgs {
    std::string models, fields, out_dir;
    double dc_tol = 1e-4;
};

int run_sweep(const SweepArgs& a) {
    Timer timer;
    const std::vector<std::string> model_paths = split_list(a.models);
    const std::vector<std::string> field_paths = split_list(a.fields);
    if (model_paths.empty() || field_paths.empty())
        throw CLI::ValidationError("--models/--fields", "need at least one of each");
    std::vector<dld::FlowField> fields;
    for (const std::string& p : field_paths) fields.push_back(dld::read_field(p));

    dld::RunManifest m;
    m.command = "sweep";
    m.config = {{"models", a.models}, {"fields", a.fields}, {"dc_tol", a.dc_tol},
                {"out", a.out_dir}};
    m.inputs = field_paths;

    for (const std::string& mp : model_paths) {
        const dld::SurrogateModel model = dld::load_model(mp);
        dld::EvalReport rep = dld::sweep_report(fields, model, a.dc_tol);
        rep.model_id = mp;
        std::string base = mp;
        const std::size_t slash = base.find_last_of('/');
        if (slash != std::string::npos) base = base.substr(slash + 1);
        const std::size_t dot = base.find_last_of('.');
        if (dot != std::string::npos) base = base.substr(0, dot);
        const std::string jp = a.out_dir + "/" + base + "_report.json";
        const std::string cp = a.out_dir + "/" + base + "_report.csv";
        dld::write_report(rep, jp, cp);
        m.inputs.push_back(mp);
        m.outputs.push_back(jp);
        m.outputs.push_back(cp);
        std::cout << base << ": mean dc error " << rep.mean_dc_error << "%, r2(u,v,p) = ("
                  << rep.mean_r2_u << ", " << rep.mean_r2_v << ", " << rep.mean_r2_p << ")\n";
    }
    m.wall_clock_sec = timer.seconds();
    dld::write_manifest(m, a.out_dir + "/sweep.manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DLD unit-cell flow surrogate toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* cgen = app.add_subcommand("gen", "solve a unit-cell flow field");
    cgen->add_option("--f", gen.f, "post diameter fraction")->required();
    cgen->add_option("--n", gen.n, "period number")->required();
    cgen->add_option("--ds", gen.ds, "cell pitch");
    cgen->add_option("--dp", gen.dp, "pressure drop");
    cgen->add_option("--mu", gen.mu, "dynamic viscosity");
    cgen->add_option("--grid", gen.grid, "cells per axis");
    cgen->add_option("--tol", gen.tol, "convergence tolerance");
    cgen->add_option("--max-iters", gen.max_iters, "iteration budget");
    cgen->add_flag("--untilted", gen.untilted, "plain periodic cell (no lattice tilt)");
    cgen->add_flag("--channel", gen.channel, "no-slip top/bottom validation mode");
    cgen->add_flag("--no-posts", gen.no_posts, "obstacle-free validation mode");
    cgen->add_option("--out", gen.out, "output field CSV")->required();

    SampleArgs sample;
    CLI::App* csample = app.add_subcommand("sample", "build a dataset from field files");
    csample->add_option("--fields", sample.fields, "comma-separated field CSVs")->required();
    csample->add_option("--n-samples", sample.n_samples, "records per geometry");
    csample->add_option("--n-wall", sample.n_wall, "wall points per geometry");
    csample->add_option("--n-io", sample.n_io, "inlet/outlet points per geometry");
    csample->add_option("--seed", sample.seed, "sampling seed");
    csample->add_option("--out", sample.out, "output dataset CSV")->required();

    TrainArgs train;
    CLI::App* ctrain = app.add_subcommand("train", "train a surrogate");
    ctrain->add_option("--data", train.data, "dataset CSV")->required();
    ctrain->add_option("--variant", train.variant, "periodic | soft | baseline");
    ctrain->add_option("--epochs", train.epochs, "training epochs");
    ctrain->add_option("--batch", train.batch, "batch size");
    ctrain->add_option("--lr0", train.lr0, "initial learning rate");
    ctrain->add_option("--seed", train.seed, "training seed");
    ctrain->add_flag("--paper-scale", train.paper_scale, "1000 epochs, batch 2000");
    ctrain->add_option("--out", train.out, "output checkpoint JSON")->required();
    ctrain->add_option("--history", train.history, "training history CSV");

    EvalArgs eval;
    CLI::App* ceval = app.add_subcommand("eval", "field R2 of a model vs an oracle field");
    ceval->add_option("--model", eval.model, "model checkpoint")->required();
    ceval->add_option("--field", eval.field, "oracle field CSV")->required();
    ceval->add_option("--out", eval.out, "output report JSON")->required();
    ceval->add_option("--error-map", eval.error_map, "optional error map CSV");

    DcArgs dc;
    CLI::App* cdc = app.add_subcommand("dc", "critical diameter by bisection");
    cdc->add_option("--model", dc.src.model, "model checkpoint");
    cdc->add_option("--field", dc.src.field, "oracle field CSV");
    cdc->add_option("--f", dc.src.f, "post diameter fraction (with --model)");
    cdc->add_option("--n", dc.src.n, "period number (with --model)");
    cdc->add_option("--tol", dc.tol, "bisection tolerance");
    cdc->add_option("--out", dc.out, "output JSON");

    TraceArgs trace;
    CLI::App* ctrace = app.add_subcommand("trace", "trace one particle");
    ctrace->add_option("--model", trace.src.model, "model checkpoint");
    ctrace->add_option("--field", trace.src.field, "oracle field CSV");
    ctrace->add_option("--f", trace.src.f, "post diameter fraction (with --model)");
    ctrace->add_option("--n", trace.src.n, "period number (with --model)");
    ctrace->add_option("--dp", trace.dp_particle, "particle diameter")->required();
    ctrace->add_option("--stride", trace.stride, "record every k-th point");
    ctrace->add_option("--out", trace.out, "trajectory CSV")->required();

    PeriodicityArgs per;
    CLI::App* cper = app.add_subcommand("periodicity", "top/bottom boundary mismatch scan");
    cper->add_option("--model", per.model, "model checkpoint")->required();
    cper->add_option("--f", per.f, "post diameter fraction");
    cper->add_option("--n", per.n, "period number");
    cper->add_option("--probes", per.probes, "x probe count");
    cper->add_option("--out", per.out, "output JSON");

    SweepArgs sweep;
    CLI::App* csweep = app.add_subcommand("sweep", "comparative report over geometries");
    csweep->add_option("--models", sweep.models, "comma-separated checkpoints")->required();
    csweep->add_option("--fields", sweep.fields, "comma-separated oracle field CSVs")
        ->required();
    csweep->add_option("--dc-tol", sweep.dc_tol, "bisection tolerance");
    csweep->add_option("--out", sweep.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*cgen) return run_gen(gen);
        if (*csample) return run_sample(sample);
        if (*ctrain) return run_train(train);
        if (*ceval) return run_eval(eval);
        if (*cdc) return run_dc(dc);
        if (*ctrace) return run_trace(trace);
        if (*cper) return run_periodicity(per);
        if (*csweep) return run_sweep(sweep);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dld::ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual()
                  << ")\n";
        return kExitNumerical;
    } catch (const dld::TrainingDivergedError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const dld::NoCrossingError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const dld::TrajectoryStallError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const dld::ResolutionError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}

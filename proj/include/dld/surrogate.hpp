/// @file surrogate.hpp
/// @brief The field surrogate: three independent sub-networks (u, v, p heads),
///        periodic first layer, combined data + boundary loss, training loop,
///        JSON checkpoints, and the soft-enforcement / baseline ablation
///        variants.

#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dld/dataset.hpp"
#include "dld/neural.hpp"
#include "dld/tracer.hpp"

namespace dld {

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(const std::string& msg, long epoch)
        : std::runtime_error(msg), epoch_(epoch) {}
    long epoch() const { return epoch_; }

private:
    long epoch_;
};

enum class Variant { periodic_layer, soft_periodic, baseline };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::periodic_layer: return "periodic_layer";
        case Variant::soft_periodic: return "soft_periodic";
        case Variant::baseline: return "baseline";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "periodic_layer") return Variant::periodic_layer;
    if (s == "soft_periodic") return Variant::soft_periodic;
    if (s == "baseline") return Variant::baseline;
    throw std::invalid_argument("unknown variant: " + s);
}

struct Norms {
    double n_scale = 14.0;  ///< N is fed as N / n_scale (paper's max N)
    double u_scale = 1.0;   ///< velocity normalization the targets were built with
    double dp = 0.1;
};

struct TrainConfig {
    double lr0 = 1e-3;
    long epochs = 200;    ///< desk default; the paper runs 1000
    long batch = 2000;
    double lambda_data = 1.0;
    double lambda_wall = 1.0;
    double lambda_inlet_v = 1.0;
    double lambda_p_io = 1.0;
    double lambda_periodic = 1.0;  ///< soft_periodic variant only
    long periodic_pairs = 64;      ///< x probes per geometry for the soft term
    double dp = 0.1;
    std::uint64_t seed = 0;
};

/// One scalar head. input_stage holds the first layer (periodic or raw-xy);
/// the baseline variant has no input stage and feeds the trunk directly.
struct Subnet {
    std::vector<DenseLayer> input_stage;
    std::vector<DenseLayer> trunk;
};

struct SurrogateModel {
    Variant variant = Variant::periodic_layer;
    double Ds = 0.4;
    int harmonics = 1;
    Norms norms;
    TrainConfig hyper;
    std::uint64_t seed = 0;
    std::array<Subnet, 3> nets;  ///< u, v, p
};

// ============================================================================
// Construction
// ============================================================================

inline SurrogateModel make_surrogate(Variant variant, double Ds, const Norms& norms,
                                     std::uint64_t seed, int harmonics = 1) {
    SurrogateModel m;
    m.variant = variant;
    m.Ds = Ds;
    m.harmonics = harmonics;
    m.norms = norms;
    m.seed = seed;
    for (int k = 0; k < 3; ++k) {
        Rng rng(seed + 7919 * static_cast<std::uint64_t>(k + 1));
        Subnet& net = m.nets[k];
        if (variant == Variant::baseline) {
            // 50 neurons across three layers with Swish, raw (x, y, F, N) input
            net.trunk.push_back(make_dense(4, 50, Activation::swish, rng));
            net.trunk.push_back(make_dense(50, 50, Activation::swish, rng));
            net.trunk.push_back(make_dense(50, 50, Activation::swish, rng));
            net.trunk.push_back(make_dense(50, 1, Activation::identity, rng));
            continue;
        }
        const int in_dim = (variant == Variant::periodic_layer) ? 1 + 2 * harmonics : 2;
        net.input_stage.push_back(make_dense(in_dim, 64, Activation::tanh, rng));
        net.trunk.push_back(make_dense(66, 64, Activation::swish, rng));
        for (int l = 0; l < 6; ++l)
            net.trunk.push_back(make_dense(64, 64, Activation::swish, rng));
        net.trunk.push_back(make_dense(64, 1, Activation::identity, rng));
    }
    return m;
}

// ============================================================================
// Prediction
// ============================================================================

namespace detail {

/// Feature matrix for the input stage (or the trunk, for baseline).
inline MatrixXd stage_features(const SurrogateModel& m, const double* xs, const double* ys,
                               const double* Fs, const double* Ns, long n) {
    if (m.variant == Variant::periodic_layer) {
        MatrixXd f(1 + 2 * m.harmonics, n);
        for (long c = 0; c < n; ++c)
            f.col(c) = periodic_features(xs[c], ys[c], m.Ds, m.harmonics);
        return f;
    }
    if (m.variant == Variant::soft_periodic) {
        MatrixXd f(2, n);
        for (long c = 0; c < n; ++c) {
            f(0, c) = xs[c];
            f(1, c) = ys[c];
        }
        return f;
    }
    MatrixXd f(4, n);
    for (long c = 0; c < n; ++c) {
        f(0, c) = xs[c];
        f(1, c) = ys[c];
        f(2, c) = Fs[c];
        f(3, c) = Ns[c] / m.norms.n_scale;
    }
    return f;
}

struct SubnetCache {
    ForwardCache stage;
    ForwardCache trunk;
    MatrixXd trunk_in;
};

/// Forward one subnet over a batch; caches intermediates when requested.
inline Eigen::RowVectorXd subnet_forward(const SurrogateModel& m, const Subnet& net,
                                         const MatrixXd& stage_feat, const double* Fs,
                                         const double* Ns, long n, SubnetCache* cache) {
    if (m.variant == Variant::baseline) {
        MatrixXd out = forward(net.trunk, stage_feat, cache ? &cache->trunk : nullptr);
        return out.row(0);
    }
    MatrixXd h = forward(net.input_stage, stage_feat, cache ? &cache->stage : nullptr);
    MatrixXd z(h.rows() + 2, n);
    z.topRows(h.rows()) = h;
    for (long c = 0; c < n; ++c) {
        z(h.rows(), c) = Fs[c];
        z(h.rows() + 1, c) = Ns[c] / m.norms.n_scale;
    }
    if (cache) cache->trunk_in = z;
    MatrixXd out = forward(net.trunk, z, cache ? &cache->trunk : nullptr);
    return out.row(0);
}

/// Backward one subnet given d(loss)/d(output) as a row vector; accumulates
/// parameter gradients scaled by `scale` into grads (resizing on first use).
inline void subnet_backward(const SurrogateModel& m, const Subnet& net, const SubnetCache& cache,
                            const Eigen::RowVectorXd& dout, double scale,
                            std::vector<LayerGrads>& stage_grads,
                            std::vector<LayerGrads>& trunk_grads) {
    MatrixXd dy = dout;
    std::vector<LayerGrads> tg;
    MatrixXd dz = backward(net.trunk, cache.trunk, dy, tg);
    auto accumulate = [scale](std::vector<LayerGrads>& into, std::vector<LayerGrads>& from) {
        if (into.empty()) {
            into.resize(from.size());
            for (std::size_t i = 0; i < from.size(); ++i) {
                into[i].d_weights = scale * from[i].d_weights;
                into[i].d_bias = scale * from[i].d_bias;
            }
        } else {
            for (std::size_t i = 0; i < from.size(); ++i) {
                into[i].d_weights += scale * from[i].d_weights;
                into[i].d_bias += scale * from[i].d_bias;
            }
        }
    };
    accumulate(trunk_grads, tg);
    if (m.variant == Variant::baseline) return;
    std::vector<LayerGrads> sg;
    const long h_rows = net.input_stage.back().out_dim();
    MatrixXd dh = dz.topRows(h_rows);
    backward(net.input_stage, cache.stage, dh, sg);
    accumulate(stage_grads, sg);
}

}  // namespace detail

/// Predict the three scalar fields at one point. For the periodic_layer
/// variant the result is exactly Dy-periodic in y.
struct Prediction {
    double u, v, p;
};

inline Prediction predict(const SurrogateModel& m, double x, double y, double F, double N) {
    const double xs[1] = {x}, ys[1] = {y}, Fs[1] = {F}, Ns[1] = {N};
    const MatrixXd feat = detail::stage_features(m, xs, ys, Fs, Ns, 1);
    Prediction out{};
    double* slots[3] = {&out.u, &out.v, &out.p};
    for (int k = 0; k < 3; ++k)
        *slots[k] = detail::subnet_forward(m, m.nets[k], feat, Fs, Ns, 1, nullptr)(0);
    return out;
}

// ============================================================================
// Losses
// ============================================================================

/// Mean over the batch of (u - u_hat)^2 + (v - v_hat)^2 + (p - p_hat)^2.
inline double data_loss(const SurrogateModel& m, const std::vector<SampleRecord>& batch) {
    if (batch.empty()) throw std::invalid_argument("data_loss: empty batch");
    const long n = static_cast<long>(batch.size());
    std::vector<double> xs(n), ys(n), Fs(n), Ns(n);
    for (long i = 0; i < n; ++i) {
        xs[i] = batch[i].x;
        ys[i] = batch[i].y;
        Fs[i] = batch[i].F;
        Ns[i] = batch[i].N;
    }
    const MatrixXd feat = detail::stage_features(m, xs.data(), ys.data(), Fs.data(), Ns.data(), n);
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
        const Eigen::RowVectorXd pred =
            detail::subnet_forward(m, m.nets[k], feat, Fs.data(), Ns.data(), n, nullptr);
        for (long i = 0; i < n; ++i) {
            const double target = (k == 0) ? batch[i].u : (k == 1) ? batch[i].v : batch[i].p;
            const double d = pred(i) - target;
            total += d * d;
        }
    }
    return total / static_cast<double>(n);
}

/// Weighted mean-square boundary residuals: velocity at walls, vertical
/// velocity at the inlet, pressure drop at inlet/outlet.
struct BcWeights {
    double wall = 1.0;
    double inlet_v = 1.0;
    double p_io = 1.0;
};

inline double bc_loss(const SurrogateModel& m, const BoundarySets& bounds, double F, double N,
                      double dp, const BcWeights& w = {}) {
    if (bounds.wall_points.empty() || bounds.inlet_points.empty() ||
        bounds.outlet_points.empty())
        throw std::invalid_argument("bc_loss: empty boundary sets");
    auto eval = [&](const std::vector<BoundaryPoint>& pts, int net, double target) {
        const long n = static_cast<long>(pts.size());
        std::vector<double> xs(n), ys(n), Fs(n, F), Ns(n, N);
        for (long i = 0; i < n; ++i) {
            xs[i] = pts[i].x;
            ys[i] = pts[i].y;
        }
        const MatrixXd feat =
            detail::stage_features(m, xs.data(), ys.data(), Fs.data(), Ns.data(), n);
        const Eigen::RowVectorXd pred =
            detail::subnet_forward(m, m.nets[net], feat, Fs.data(), Ns.data(), n, nullptr);
        double s = 0.0;
        for (long i = 0; i < n; ++i) {
            const double d = pred(i) - target;
            s += d * d;
        }
        return s / static_cast<double>(n);
    };
    double loss = 0.0;
    loss += w.wall * (eval(bounds.wall_points, 0, 0.0) + eval(bounds.wall_points, 1, 0.0));
    loss += w.inlet_v * eval(bounds.inlet_points, 1, 0.0);
    loss += w.p_io * (eval(bounds.inlet_points, 2, dp) + eval(bounds.outlet_points, 2, 0.0));
    return loss;
}

/// Mean-square top/bottom mismatch at n_pairs x probes (soft variant's
/// training term). Calling it on a periodic_layer model is a usage error:
/// the term is identically zero there and must not mask the architecture.
inline double soft_periodicity_loss(const SurrogateModel& m, const UnitCellGeometry& cell,
                                    long n_pairs, bool allow_periodic = false) {
    if (n_pairs < 1) throw std::invalid_argument("soft_periodicity_loss: n_pairs must be >= 1");
    if (m.variant == Variant::periodic_layer && !allow_periodic)
        throw std::logic_error(
            "soft_periodicity_loss: identically zero for the periodic_layer variant");
    double s = 0.0;
    for (long i = 0; i < n_pairs; ++i) {
        const double x = (i + 0.5) * cell.Dx() / static_cast<double>(n_pairs);
        const Prediction a = predict(m, x, 0.0, cell.F, cell.N);
        const Prediction b = predict(m, x, cell.Dy(), cell.F, cell.N);
        s += (a.u - b.u) * (a.u - b.u) + (a.v - b.v) * (a.v - b.v) + (a.p - b.p) * (a.p - b.p);
    }
    return s / static_cast<double>(n_pairs);
}

// ============================================================================
// Training
// ============================================================================

struct EpochStats {
    long epoch = 0;
    double lr = 0.0;
    double data_loss = 0.0;
    double bc_loss = 0.0;
    double periodicity_loss = 0.0;
    double total = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

namespace detail {

/// All trainable layers of a model, flattened, with shared optimizer state.
struct TrainState {
    std::vector<std::vector<DenseLayer>*> groups;
    std::vector<OptimizerState> opt;
};

inline TrainState make_train_state(SurrogateModel& m, double lr0) {
    TrainState st;
    for (int k = 0; k < 3; ++k) {
        if (!m.nets[k].input_stage.empty()) st.groups.push_back(&m.nets[k].input_stage);
        st.groups.push_back(&m.nets[k].trunk);
    }
    for (auto* g : st.groups) st.opt.push_back(make_optimizer(*g, lr0));
    return st;
}

}  // namespace detail

/// Train a fresh model of the given variant on the dataset. Reproducible
/// from cfg.seed; history records one row per epoch.
inline SurrogateModel train(const Dataset& ds, const TrainConfig& cfg, Variant variant,
                            TrainHistory* history = nullptr) {
    if (ds.records.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch < 1 || cfg.batch > static_cast<long>(ds.records.size()))
        throw std::invalid_argument("train: batch must be in [1, dataset size]");

    Norms norms;
    norms.u_scale = ds.meta.u_scale;
    norms.dp = cfg.dp;
    const double Ds = ds.meta.geometries.empty() ? 0.4 : ds.meta.geometries.front().Ds;
    SurrogateModel model = make_surrogate(variant, Ds, norms, cfg.seed);
    model.hyper = cfg;

    detail::TrainState st = detail::make_train_state(model, cfg.lr0);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::size_t> order(ds.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<UnitCellGeometry> cells;
    for (const GeometryRef& g : ds.meta.geometries) cells.push_back(make_cell(g.F, g.N, g.Ds));

    const BcWeights bw{cfg.lambda_wall, cfg.lambda_inlet_v, cfg.lambda_p_io};

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg.lr0);
        for (auto& o : st.opt) o.lr = lr;
        shuffle(order, shuffle_rng);

        double ep_data = 0.0, ep_bc = 0.0, ep_per = 0.0;
        long n_steps = 0;

        for (std::size_t start = 0; start + cfg.batch <= order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            // --- gradient accumulators, one pair per subnet ----------------
            std::array<std::vector<LayerGrads>, 3> g_stage, g_trunk;

            // data term
            const long n = cfg.batch;
            std::vector<double> xs(n), ys(n), Fs(n), Ns(n), tu(n), tv(n), tp(n);
            for (long i = 0; i < n; ++i) {
                const SampleRecord& r = ds.records[order[start + i]];
                xs[i] = r.x;
                ys[i] = r.y;
                Fs[i] = r.F;
                Ns[i] = r.N;
                tu[i] = r.u;
                tv[i] = r.v;
                tp[i] = r.p;
            }
            const MatrixXd feat =
                detail::stage_features(model, xs.data(), ys.data(), Fs.data(), Ns.data(), n);
            double batch_data = 0.0;
            for (int k = 0; k < 3; ++k) {
                detail::SubnetCache cache;
                const Eigen::RowVectorXd pred = detail::subnet_forward(
                    model, model.nets[k], feat, Fs.data(), Ns.data(), n, &cache);
                const double* tgt = (k == 0) ? tu.data() : (k == 1) ? tv.data() : tp.data();
                Eigen::RowVectorXd dout(n);
                for (long i = 0; i < n; ++i) {
                    const double d = pred(i) - tgt[i];
                    batch_data += d * d;
                    dout(i) = 2.0 * d / static_cast<double>(n);
                }
                detail::subnet_backward(model, model.nets[k], cache, dout, cfg.lambda_data,
                                        g_stage[k], g_trunk[k]);
            }
            batch_data /= static_cast<double>(n);

            // boundary terms, over the full per-geometry sets
            double batch_bc = 0.0;
            auto bc_term = [&](const std::vector<BoundaryPoint>& pts, int net, double target,
                               double weight, double F, double N) {
                if (pts.empty() || weight == 0.0) return;
                const long bn = static_cast<long>(pts.size());
                std::vector<double> bx(bn), by(bn), bF(bn, F), bN(bn, N);
                for (long i = 0; i < bn; ++i) {
                    bx[i] = pts[i].x;
                    by[i] = pts[i].y;
                }
                const MatrixXd bf = detail::stage_features(model, bx.data(), by.data(),
                                                           bF.data(), bN.data(), bn);
                detail::SubnetCache cache;
                const Eigen::RowVectorXd pred = detail::subnet_forward(
                    model, model.nets[net], bf, bF.data(), bN.data(), bn, &cache);
                Eigen::RowVectorXd dout(bn);
                double s = 0.0;
                for (long i = 0; i < bn; ++i) {
                    const double d = pred(i) - target;
                    s += d * d;
                    dout(i) = 2.0 * d / static_cast<double>(bn);
                }
                batch_bc += weight * s / static_cast<double>(bn);
                detail::subnet_backward(model, model.nets[net], cache, dout, weight, g_stage[net],
                                        g_trunk[net]);
            };
            for (std::size_t g = 0; g < ds.boundary.size(); ++g) {
                const BoundarySets& b = ds.boundary[g];
                const double F = ds.meta.geometries[g].F;
                const double N = ds.meta.geometries[g].N;
                bc_term(b.wall_points, 0, 0.0, bw.wall, F, N);
                bc_term(b.wall_points, 1, 0.0, bw.wall, F, N);
                bc_term(b.inlet_points, 1, 0.0, bw.inlet_v, F, N);
                bc_term(b.inlet_points, 2, cfg.dp, bw.p_io, F, N);
                bc_term(b.outlet_points, 2, 0.0, bw.p_io, F, N);
            }

            // soft periodicity term (ablation variant only)
            double batch_per = 0.0;
            if (variant == Variant::soft_periodic && cfg.lambda_periodic > 0.0) {
                for (const UnitCellGeometry& cell : cells) {
                    const long np = cfg.periodic_pairs;
                    std::vector<double> px(2 * np), py(2 * np), pF(2 * np, cell.F),
                        pN(2 * np, cell.N);
                    for (long i = 0; i < np; ++i) {
                        const double x = (i + 0.5) * cell.Dx() / static_cast<double>(np);
                        px[2 * i] = x;
                        py[2 * i] = 0.0;
                        px[2 * i + 1] = x;
                        py[2 * i + 1] = cell.Dy();
                    }
                    const MatrixXd pf = detail::stage_features(model, px.data(), py.data(),
                                                               pF.data(), pN.data(), 2 * np);
                    for (int k = 0; k < 3; ++k) {
                        detail::SubnetCache cache;
                        const Eigen::RowVectorXd pred = detail::subnet_forward(
                            model, model.nets[k], pf, pF.data(), pN.data(), 2 * np, &cache);
                        Eigen::RowVectorXd dout = Eigen::RowVectorXd::Zero(2 * np);
                        double s = 0.0;
                        for (long i = 0; i < np; ++i) {
                            const double d = pred(2 * i) - pred(2 * i + 1);
                            s += d * d;
                            dout(2 * i) += 2.0 * d / static_cast<double>(np);
                            dout(2 * i + 1) -= 2.0 * d / static_cast<double>(np);
                        }
                        batch_per += s / static_cast<double>(np);
                        detail::subnet_backward(model, model.nets[k], cache, dout,
                                                cfg.lambda_periodic, g_stage[k], g_trunk[k]);
                    }
                }
            }

            // --- step -------------------------------------------------------
            std::size_t gi = 0;
            for (int k = 0; k < 3; ++k) {
                if (!model.nets[k].input_stage.empty())
                    adam_step(st.opt[gi++], model.nets[k].input_stage, g_stage[k]);
                adam_step(st.opt[gi++], model.nets[k].trunk, g_trunk[k]);
            }

            ep_data += batch_data;
            ep_bc += batch_bc;
            ep_per += batch_per;
            ++n_steps;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.data_loss = cfg.lambda_data * ep_data / std::max(n_steps, 1L);
        stats.bc_loss = ep_bc / std::max(n_steps, 1L);
        stats.periodicity_loss =
            cfg.lambda_periodic * ep_per / std::max(n_steps, 1L);
        stats.total = stats.data_loss + stats.bc_loss + stats.periodicity_loss;
        if (!std::isfinite(stats.total))
            throw TrainingDivergedError(
                "train: loss is not finite at epoch " + std::to_string(epoch), epoch);
        if (history) history->push_back(stats);
    }
    return model;
}

inline void write_history(const TrainHistory& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history: cannot open " + path);
    out << "epoch,lr,data_loss,bc_loss,periodicity_loss,total\n";
    for (const EpochStats& e : h)
        out << e.epoch << ',' << detail::fmt_full(e.lr) << ',' << detail::fmt_full(e.data_loss)
            << ',' << detail::fmt_full(e.bc_loss) << ',' << detail::fmt_full(e.periodicity_loss)
            << ',' << detail::fmt_full(e.total) << '\n';
}

// ============================================================================
// Checkpoints
// ============================================================================

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json layers_to_json(const std::vector<DenseLayer>& layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const DenseLayer& l : layers) {
        nlohmann::json jl;
        jl["in"] = l.in_dim();
        jl["out"] = l.out_dim();
        jl["activation"] = activation_name(l.activation);
        nlohmann::json w = nlohmann::json::array();
        for (int r = 0; r < l.out_dim(); ++r)
            for (int c = 0; c < l.in_dim(); ++c) w.push_back(l.weights(r, c));
        nlohmann::json b = nlohmann::json::array();
        for (int r = 0; r < l.out_dim(); ++r) b.push_back(l.bias(r));
        jl["weights"] = std::move(w);
        jl["bias"] = std::move(b);
        arr.push_back(std::move(jl));
    }
    return arr;
}

inline std::vector<DenseLayer> layers_from_json(const nlohmann::json& arr) {
    std::vector<DenseLayer> layers;
    for (const auto& jl : arr) {
        DenseLayer l;
        const int in = jl.at("in").get<int>(), out = jl.at("out").get<int>();
        l.activation = activation_from_name(jl.at("activation").get<std::string>());
        l.weights.resize(out, in);
        const auto& w = jl.at("weights");
        if (static_cast<long>(w.size()) != static_cast<long>(in) * out)
            throw std::runtime_error("model checkpoint: weight count mismatch");
        long idx = 0;
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) l.weights(r, c) = w.at(idx++).get<double>();
        l.bias.resize(out);
        const auto& b = jl.at("bias");
        if (static_cast<long>(b.size()) != out)
            throw std::runtime_error("model checkpoint: bias count mismatch");
        for (int r = 0; r < out; ++r) l.bias(r) = b.at(r).get<double>();
        layers.push_back(std::move(l));
    }
    return layers;
}

}  // namespace detail

inline void save_model(const SurrogateModel& m, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["variant"] = variant_name(m.variant);
    j["Ds"] = m.Ds;
    j["harmonics"] = m.harmonics;
    j["norms"] = {{"n_scale", m.norms.n_scale},
                  {"u_scale", m.norms.u_scale},
                  {"dp", m.norms.dp}};
    j["seed"] = m.seed;
    j["config"] = {{"lr0", m.hyper.lr0},
                   {"epochs", m.hyper.epochs},
                   {"batch", m.hyper.batch},
                   {"lambda_data", m.hyper.lambda_data},
                   {"lambda_wall", m.hyper.lambda_wall},
                   {"lambda_inlet_v", m.hyper.lambda_inlet_v},
                   {"lambda_p_io", m.hyper.lambda_p_io},
                   {"lambda_periodic", m.hyper.lambda_periodic},
                   {"periodic_pairs", m.hyper.periodic_pairs},
                   {"dp", m.hyper.dp},
                   {"seed", m.hyper.seed}};
    const char* names[3] = {"u", "v", "p"};
    for (int k = 0; k < 3; ++k) {
        j["nets"][names[k]] = {{"input_stage", detail::layers_to_json(m.nets[k].input_stage)},
                               {"trunk", detail::layers_to_json(m.nets[k].trunk)}};
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline SurrogateModel load_model(const std::string& path,
                                 std::optional<Variant> expected = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_model: parse error in " + path + ": " + e.what());
    }
    const int ver = j.at("format_version").get<int>();
    if (ver != kModelFormatVersion)
        throw std::runtime_error("load_model: unsupported format version " +
                                 std::to_string(ver));
    SurrogateModel m;
    m.variant = variant_from_name(j.at("variant").get<std::string>());
    if (expected && *expected != m.variant)
        throw std::runtime_error("load_model: variant mismatch, file holds " +
                                 variant_name(m.variant) + " but " + variant_name(*expected) +
                                 " was requested");
    m.Ds = j.at("Ds").get<double>();
    m.harmonics = j.at("harmonics").get<int>();
    m.norms.n_scale = j.at("norms").at("n_scale").get<double>();
    m.norms.u_scale = j.at("norms").at("u_scale").get<double>();
    m.norms.dp = j.at("norms").at("dp").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& c = j.at("config");
    m.hyper.lr0 = c.at("lr0").get<double>();
    m.hyper.epochs = c.at("epochs").get<long>();
    m.hyper.batch = c.at("batch").get<long>();
    m.hyper.lambda_data = c.at("lambda_data").get<double>();
    m.hyper.lambda_wall = c.at("lambda_wall").get<double>();
    m.hyper.lambda_inlet_v = c.at("lambda_inlet_v").get<double>();
    m.hyper.lambda_p_io = c.at("lambda_p_io").get<double>();
    m.hyper.lambda_periodic = c.at("lambda_periodic").get<double>();
    m.hyper.periodic_pairs = c.at("periodic_pairs").get<long>();
    m.hyper.dp = c.at("dp").get<double>();
    m.hyper.seed = c.at("seed").get<std::uint64_t>();
    const char* names[3] = {"u", "v", "p"};
    for (int k = 0; k < 3; ++k) {
        m.nets[k].input_stage =
            detail::layers_from_json(j.at("nets").at(names[k]).at("input_stage"));
        m.nets[k].trunk = detail::layers_from_json(j.at("nets").at(names[k]).at("trunk"));
    }
    return m;
}

// ============================================================================
// Tracer adapter
// ============================================================================

/// SurrogateModel with fixed (F, N) as a velocity source for the tracer.
/// Training fields use the tilted lattice, so the adapter defaults to it.
class SurrogateFlowSource final : public FlowSource {
public:
    SurrogateFlowSource(const SurrogateModel& model, UnitCellGeometry cell, bool tilted = true,
                        double step = 0.0)
        : model_(&model),
          cell_(cell),
          tilted_(tilted),
          step_(step > 0.0 ? step : cell.Ds / 256.0) {}

    const UnitCellGeometry& cell() const override { return cell_; }

    Velocity velocity_at(double x, double y) const override {
        wrap_into_cell(cell_, x, y, tilted_);
        detail::check_not_solid(cell_, x, y, tilted_);
        const Prediction pr = predict(*model_, x, y, cell_.F, cell_.N);
        return {pr.u, pr.v};
    }

    double step_scale() const override { return step_; }

    bool tilted() const override { return tilted_; }

private:
    const SurrogateModel* model_;
    UnitCellGeometry cell_;
    bool tilted_;
    double step_;
};

}  // namespace dld

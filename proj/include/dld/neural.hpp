/// @file neural.hpp
/// @brief Minimal dense network stack: layers, activations, periodic feature
///        map, reverse-mode gradients, Adam, step-decay learning rate.
///
/// Batches are column-major: an input matrix is (in_dim x batch), one sample
/// per column. All operations are deterministic for a fixed seed.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dld/rng.hpp"

namespace dld {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ============================================================================
// Activations
// ============================================================================

enum class Activation { identity, tanh, swish };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::swish: return "swish";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "swish") return Activation::swish;
    throw std::invalid_argument("unknown activation: " + s);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double swish(double z) { return z * sigmoid(z); }

/// d/dz [z*sigmoid(z)] = sigmoid(z) * (1 + z * (1 - sigmoid(z)))
inline double swish_prime(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::tanh: return std::tanh(z);
        case Activation::swish: return swish(z);
    }
    return z;
}

inline double activate_prime(Activation a, double z) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::swish: return swish_prime(z);
    }
    return 1.0;
}

// ============================================================================
// Periodic feature map
// ============================================================================

/// Wrap y into [0, Dy). fmod computes an exact remainder, so y = Dy maps to
/// exactly 0 and wrapped inputs reproduce bit-identical features.
inline double wrap_periodic(double y, double Dy) {
    double w = std::fmod(y, Dy);
    if (w < 0.0) w += Dy;
    if (w >= Dy) w = 0.0;
    return w;
}

/// [x, sin(2*pi*k*y/Dy), cos(2*pi*k*y/Dy)] for k = 1..harmonics.
/// Exactly Dy-periodic in y: the wrap above feeds sin/cos identical
/// arguments for y and y + Dy whenever the sum is representable.
inline VectorXd periodic_features(double x, double y, double Dy, int harmonics = 1) {
    if (!(Dy > 0.0)) throw std::domain_error("periodic_features: Dy must be positive");
    if (harmonics < 1) throw std::domain_error("periodic_features: harmonics must be >= 1");
    const double yw = wrap_periodic(y, Dy);
    VectorXd f(1 + 2 * harmonics);
    f(0) = x;
    for (int k = 1; k <= harmonics; ++k) {
        const double arg = 2.0 * std::numbers::pi * static_cast<double>(k) * yw / Dy;
        f(1 + 2 * (k - 1)) = std::sin(arg);
        f(2 + 2 * (k - 1)) = std::cos(arg);
    }
    return f;
}

// ============================================================================
// Dense layers
// ============================================================================

struct DenseLayer {
    MatrixXd weights;  ///< (out x in)
    VectorXd bias;     ///< (out)
    Activation activation = Activation::identity;

    int in_dim() const { return static_cast<int>(weights.cols()); }
    int out_dim() const { return static_cast<int>(weights.rows()); }
};

/// Uniform init scaled by 1/sqrt(fan_in), reproducible from the stream.
inline DenseLayer make_dense(int in_dim, int out_dim, Activation act, Rng& rng) {
    DenseLayer layer;
    layer.weights.resize(out_dim, in_dim);
    layer.bias = VectorXd::Zero(out_dim);
    layer.activation = act;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c)
            layer.weights(r, c) = rng.uniform(-scale, scale);
    return layer;
}

struct LayerCache {
    MatrixXd input;  ///< (in x batch)
    MatrixXd pre;    ///< pre-activation (out x batch)
};

using ForwardCache = std::vector<LayerCache>;

struct LayerGrads {
    MatrixXd d_weights;
    VectorXd d_bias;
};

/// Composition of affine + activation per layer over a batch of columns.
/// Pass a cache to keep the intermediates backward() needs.
inline MatrixXd forward(const std::vector<DenseLayer>& layers, const MatrixXd& input,
                        ForwardCache* cache = nullptr) {
    if (cache) {
        cache->clear();
        cache->reserve(layers.size());
    }
    MatrixXd x = input;
    for (const DenseLayer& layer : layers) {
        if (x.rows() != layer.in_dim())
            throw std::invalid_argument("forward: dimension mismatch, input rows " +
                                        std::to_string(x.rows()) + " vs layer in_dim " +
                                        std::to_string(layer.in_dim()));
        MatrixXd z = (layer.weights * x).colwise() + layer.bias;
        if (cache) cache->push_back({std::move(x), z});
        x = z.unaryExpr([&layer](double v) { return activate(layer.activation, v); });
    }
    return x;
}

inline VectorXd forward(const std::vector<DenseLayer>& layers, const VectorXd& input,
                        ForwardCache* cache = nullptr) {
    const MatrixXd out = forward(layers, MatrixXd(input), cache);
    return out.col(0);
}

/// Exact reverse-mode gradients of the forward composition.
/// output_grad is dL/d(output), (out x batch). Returns dL/d(input).
inline MatrixXd backward(const std::vector<DenseLayer>& layers, const ForwardCache& cache,
                         const MatrixXd& output_grad, std::vector<LayerGrads>& grads) {
    if (cache.size() != layers.size())
        throw std::logic_error("backward: forward cache missing or stale");
    grads.resize(layers.size());
    MatrixXd dy = output_grad;
    for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
        const DenseLayer& layer = layers[li];
        const LayerCache& lc = cache[li];
        if (dy.rows() != layer.out_dim() || dy.cols() != lc.pre.cols())
            throw std::logic_error("backward: gradient shape mismatch at layer " +
                                   std::to_string(li));
        MatrixXd dz = dy.cwiseProduct(lc.pre.unaryExpr(
            [&layer](double v) { return activate_prime(layer.activation, v); }));
        grads[li].d_weights.noalias() = dz * lc.input.transpose();
        grads[li].d_bias = dz.rowwise().sum();
        dy.noalias() = layer.weights.transpose() * dz;
    }
    return dy;
}

inline std::size_t parameter_count(const std::vector<DenseLayer>& layers) {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

// ============================================================================
// Adam
// ============================================================================

struct OptimizerState {
    std::vector<MatrixXd> m_weights, v_weights;
    std::vector<VectorXd> m_bias, v_bias;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
};

inline OptimizerState make_optimizer(const std::vector<DenseLayer>& layers, double lr0) {
    OptimizerState st;
    st.lr = lr0;
    for (const auto& l : layers) {
        st.m_weights.push_back(MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        st.v_weights.push_back(MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        st.m_bias.push_back(VectorXd::Zero(l.bias.size()));
        st.v_bias.push_back(VectorXd::Zero(l.bias.size()));
    }
    return st;
}

/// Standard Adam update with bias correction; increments the step count.
inline void adam_step(OptimizerState& state, std::vector<DenseLayer>& layers,
                      const std::vector<LayerGrads>& grads) {
    if (grads.size() != layers.size() || state.m_weights.size() != layers.size())
        throw std::invalid_argument("adam_step: shape mismatch between state, layers, grads");
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (grads[i].d_weights.rows() != layers[i].weights.rows() ||
            grads[i].d_weights.cols() != layers[i].weights.cols())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(i));
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
            auto m_hat = m / b1t;
            auto v_hat = v / b2t;
            param.array() -=
                state.lr * m_hat.array() / (v_hat.array().sqrt() + state.eps_adam);
        };
        update(layers[i].weights, state.m_weights[i], state.v_weights[i], grads[i].d_weights);
        update(layers[i].bias, state.m_bias[i], state.v_bias[i], grads[i].d_bias);
    }
}

/// Step decay: halves every 50 epochs.
inline double lr_at(long epoch, double lr0) {
    if (epoch < 0) throw std::domain_error("lr_at: epoch must be >= 0");
    return lr0 * std::pow(0.5, static_cast<double>(epoch / 50));
}

}  // namespace dld

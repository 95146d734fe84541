/// @file test_neural.cpp
/// @brief Dense stack: periodic features, activations, forward/backward with
///        a finite-difference oracle, Adam, learning-rate schedule.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dld/neural.hpp"

using namespace dld;

namespace {

/// Independent scalar loss for gradient checks: sum of all outputs.
double loss_of(const std::vector<DenseLayer>& layers, const MatrixXd& input) {
    return forward(layers, input).sum();
}

/// Central finite differences over every parameter; returns the max relative
/// deviation from the analytic gradients.
double gradcheck(std::vector<DenseLayer> layers, const MatrixXd& input) {
    ForwardCache cache;
    forward(layers, input, &cache);
    std::vector<LayerGrads> grads;
    backward(layers, cache, MatrixXd::Ones(1, input.cols()), grads);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        auto probe = [&](double& param, double analytic) {
            const double orig = param;
            param = orig + h;
            const double fp = loss_of(layers, input);
            param = orig - h;
            const double fm = loss_of(layers, input);
            param = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double denom = std::max(std::abs(fd), 1e-6);
            max_rel = std::max(max_rel, std::abs(fd - analytic) / denom);
        };
        for (int r = 0; r < layers[li].out_dim(); ++r) {
            for (int c = 0; c < layers[li].in_dim(); ++c)
                probe(layers[li].weights(r, c), grads[li].d_weights(r, c));
            probe(layers[li].bias(r), grads[li].d_bias(r));
        }
    }
    return max_rel;
}

}  // namespace

TEST_CASE("periodic_features wraps exactly at the period") {
    const double Dy = 0.4;
    const VectorXd a = periodic_features(0.13, 0.0, Dy);
    const VectorXd b = periodic_features(0.13, Dy, Dy);
    REQUIRE(a.size() == 3);
    CHECK(a(0) == 0.13);
    for (int i = 0; i < 3; ++i) CHECK(a(i) == b(i));  // bit-equal

    const VectorXd q = periodic_features(0.0, Dy / 4.0, Dy);
    CHECK(q(1) == Catch::Approx(1.0).margin(1e-15));
    CHECK(q(2) == Catch::Approx(0.0).margin(1e-15));
    const VectorXd half = periodic_features(0.0, Dy / 2.0, Dy);
    CHECK(half(1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(half(2) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("periodic_features is exactly periodic when the shift is representable") {
    const double Dy = 0.4;
    Rng rng(21);
    int tested = 0;
    for (int k = 0; k < 5000; ++k) {
        const double y = rng.uniform(0.0, Dy);
        const double y2 = y + Dy;
        if (y2 - Dy != y) continue;  // sum rounded; skip (Sterbenz does not apply)
        ++tested;
        const VectorXd a = periodic_features(0.2, y, Dy);
        const VectorXd b = periodic_features(0.2, y2, Dy);
        for (int i = 0; i < 3; ++i) REQUIRE(a(i) == b(i));
    }
    CHECK(tested > 1000);
}

TEST_CASE("periodic_features validates arguments and harmonic count") {
    CHECK_THROWS_AS(periodic_features(0, 0, 0.0), std::domain_error);
    CHECK_THROWS_AS(periodic_features(0, 0, 0.4, 0), std::domain_error);
    const VectorXd f = periodic_features(0.1, 0.07, 0.4, 3);
    CHECK(f.size() == 7);
}

TEST_CASE("swish values") {
    CHECK(swish(0.0) == 0.0);
    CHECK(swish(1.0) == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(swish(1.0) == Catch::Approx(0.7311).margin(5e-5));
    CHECK(swish(40.0) == Catch::Approx(40.0).epsilon(1e-12));
    CHECK(swish(-1000.0) == 0.0);  // no overflow artifacts
}

TEST_CASE("forward composes affine layers and activations") {
    // identity weights, identity activation: output equals input
    DenseLayer id;
    id.weights = MatrixXd::Identity(3, 3);
    id.bias = VectorXd::Zero(3);
    id.activation = Activation::identity;
    const VectorXd x = (VectorXd(3) << 0.3, -1.2, 2.0).finished();
    CHECK((forward({id}, x) - x).norm() == 0.0);

    // zero weights and bias: zero output
    DenseLayer zero;
    zero.weights = MatrixXd::Zero(2, 3);
    zero.bias = VectorXd::Zero(2);
    zero.activation = Activation::swish;
    CHECK(forward({zero}, x).norm() == 0.0);
}

TEST_CASE("forward matches hand-rolled dense arithmetic") {
    Rng rng(3);
    std::vector<DenseLayer> layers;
    layers.push_back(make_dense(3, 4, Activation::tanh, rng));
    layers.push_back(make_dense(4, 2, Activation::identity, rng));
    const VectorXd x = (VectorXd(3) << 0.2, -0.5, 1.1).finished();
    const VectorXd out = forward(layers, x);

    // independent evaluation with explicit loops
    std::vector<double> h(4, 0.0);
    for (int r = 0; r < 4; ++r) {
        double s = layers[0].bias(r);
        for (int c = 0; c < 3; ++c) s += layers[0].weights(r, c) * x(c);
        h[r] = std::tanh(s);
    }
    for (int r = 0; r < 2; ++r) {
        double s = layers[1].bias(r);
        for (int c = 0; c < 4; ++c) s += layers[1].weights(r, c) * h[c];
        CHECK(out(r) == Catch::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects dimension mismatches") {
    Rng rng(4);
    std::vector<DenseLayer> layers{make_dense(3, 4, Activation::swish, rng)};
    const VectorXd bad = VectorXd::Zero(2);
    CHECK_THROWS_AS(forward(layers, bad), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences for every activation") {
    Rng rng(11);
    for (Activation act : {Activation::identity, Activation::tanh, Activation::swish}) {
        std::vector<DenseLayer> layers;
        layers.push_back(make_dense(4, 6, act, rng));
        layers.push_back(make_dense(6, 1, Activation::identity, rng));
        MatrixXd input(4, 5);
        for (int c = 0; c < 5; ++c)
            for (int r = 0; r < 4; ++r) input(r, c) = rng.uniform(-1.0, 1.0);
        CHECK(gradcheck(layers, input) < 1e-5);
    }
}

TEST_CASE("backward matches finite differences through the periodic layer") {
    Rng rng(13);
    std::vector<DenseLayer> layers;
    layers.push_back(make_dense(3, 8, Activation::tanh, rng));
    layers.push_back(make_dense(8, 8, Activation::swish, rng));
    layers.push_back(make_dense(8, 1, Activation::identity, rng));
    MatrixXd input(3, 6);
    for (int c = 0; c < 6; ++c)
        input.col(c) = periodic_features(0.07 * c, 0.05 * c, 0.4);
    CHECK(gradcheck(layers, input) < 1e-5);
}

TEST_CASE("backward edge behavior: zero output gradients and linearity") {
    Rng rng(15);
    std::vector<DenseLayer> layers;
    layers.push_back(make_dense(3, 5, Activation::identity, rng));
    layers.push_back(make_dense(5, 2, Activation::identity, rng));
    MatrixXd input(3, 4);
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 3; ++r) input(r, c) = rng.uniform(-1.0, 1.0);
    ForwardCache cache;
    forward(layers, input, &cache);

    std::vector<LayerGrads> gz;
    backward(layers, cache, MatrixXd::Zero(2, 4), gz);
    for (const LayerGrads& g : gz) {
        CHECK(g.d_weights.norm() == 0.0);
        CHECK(g.d_bias.norm() == 0.0);
    }

    // linear net: gradients scale linearly with the output gradient
    MatrixXd dout(2, 4);
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 2; ++r) dout(r, c) = rng.uniform(-1.0, 1.0);
    std::vector<LayerGrads> g1, g3;
    backward(layers, cache, dout, g1);
    backward(layers, cache, MatrixXd(3.0 * dout), g3);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        CHECK((g3[li].d_weights - 3.0 * g1[li].d_weights).norm() <
              1e-12 * std::max(1.0, g1[li].d_weights.norm()));
        CHECK((g3[li].d_bias - 3.0 * g1[li].d_bias).norm() <
              1e-12 * std::max(1.0, g1[li].d_bias.norm()));
    }
}

TEST_CASE("backward requires a matching forward cache") {
    Rng rng(16);
    std::vector<DenseLayer> layers{make_dense(2, 2, Activation::tanh, rng)};
    ForwardCache empty;
    std::vector<LayerGrads> grads;
    CHECK_THROWS_AS(backward(layers, empty, MatrixXd::Ones(2, 1), grads), std::logic_error);
}

TEST_CASE("adam_step: zero gradients leave parameters unchanged") {
    Rng rng(19);
    std::vector<DenseLayer> layers{make_dense(3, 4, Activation::swish, rng)};
    const MatrixXd w0 = layers[0].weights;
    OptimizerState st = make_optimizer(layers, 1e-3);
    std::vector<LayerGrads> grads(1);
    grads[0].d_weights = MatrixXd::Zero(4, 3);
    grads[0].d_bias = VectorXd::Zero(4);
    adam_step(st, layers, grads);
    CHECK((layers[0].weights - w0).norm() == 0.0);
    CHECK(st.step == 1);
}

TEST_CASE("adam_step: first step from zero state follows the bias-corrected formula") {
    std::vector<DenseLayer> layers(1);
    layers[0].weights = MatrixXd::Zero(1, 1);
    layers[0].bias = VectorXd::Zero(1);
    layers[0].activation = Activation::identity;
    OptimizerState st = make_optimizer(layers, 1e-3);
    std::vector<LayerGrads> grads(1);
    const double g = 0.3;
    grads[0].d_weights = MatrixXd::Constant(1, 1, g);
    grads[0].d_bias = VectorXd::Zero(1);
    adam_step(st, layers, grads);
    // hand evaluation: m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    const double expected = -1e-3 * g / (std::abs(g) + 1e-8);
    CHECK(layers[0].weights(0, 0) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam_step is deterministic and validates shapes") {
    Rng rng1(23), rng2(23);
    std::vector<DenseLayer> a{make_dense(2, 3, Activation::tanh, rng1)};
    std::vector<DenseLayer> b{make_dense(2, 3, Activation::tanh, rng2)};
    OptimizerState sa = make_optimizer(a, 1e-3), sb = make_optimizer(b, 1e-3);
    std::vector<LayerGrads> grads(1);
    grads[0].d_weights = MatrixXd::Constant(3, 2, 0.1);
    grads[0].d_bias = VectorXd::Constant(3, -0.2);
    adam_step(sa, a, grads);
    adam_step(sb, b, grads);
    CHECK((a[0].weights - b[0].weights).norm() == 0.0);

    std::vector<LayerGrads> bad(1);
    bad[0].d_weights = MatrixXd::Zero(2, 2);
    bad[0].d_bias = VectorXd::Zero(3);
    CHECK_THROWS_AS(adam_step(sa, a, bad), std::invalid_argument);
}

TEST_CASE("lr_at halves every 50 epochs") {
    CHECK(lr_at(0, 1e-3) == Catch::Approx(1e-3));
    CHECK(lr_at(49, 1e-3) == Catch::Approx(1e-3));
    CHECK(lr_at(50, 1e-3) == Catch::Approx(5e-4));
    CHECK(lr_at(100, 1e-3) == Catch::Approx(2.5e-4));
    CHECK_THROWS_AS(lr_at(-1, 1e-3), std::domain_error);
}

#include <gtest/gtest.h>

#include <cmath>

#include "fstl/error.hpp"
#include "fstl/nn/network.hpp"
#include "support/reference.hpp"

using namespace fstl;
using fstl::oracle::random_labels;
using fstl::oracle::random_tensor;

namespace {

NetworkSpec dense_relu_dense() {
    return {{4}, {LayerSpec::dense(4, 5), LayerSpec::relu(), LayerSpec::dense(5, 3), LayerSpec::softmax_xent()}};
}

// Every layer kind, non-square kernels, two input channels; under 1e3 parameters.
NetworkSpec all_kinds() {
    return {{2, 5, 6},
            {LayerSpec::conv2d(2, 3, 3, 2), LayerSpec::relu(), LayerSpec::conv2d(3, 2, 2, 2), LayerSpec::flatten(),
             LayerSpec::dense(16, 6), LayerSpec::relu(), LayerSpec::dense(6, 4), LayerSpec::softmax_xent()}};
}

void set_flat(Network& net, std::size_t layer, std::size_t tensor, std::vector<float> values) {
    auto& t = net.layers()[layer].params[tensor];
    ASSERT_EQ(t.size(), values.size());
    std::copy(values.begin(), values.end(), t.values().begin());
}

}  // namespace

TEST(InitNetwork, SameSeedIsBitIdentical) {
    const auto a = init_network(all_kinds(), 42);
    const auto b = init_network(all_kinds(), 42);
    EXPECT_EQ(a.flat_parameters(), b.flat_parameters());
    EXPECT_NE(a.flat_parameters(), init_network(all_kinds(), 43).flat_parameters());
}

TEST(InitNetwork, DenseShapes) {
    const auto net = init_network({{4}, {LayerSpec::dense(4, 3)}}, 1);
    ASSERT_EQ(net.layers()[0].params.size(), 2u);
    EXPECT_EQ(net.layers()[0].params[0].shape(), (Shape{3, 4}));
    EXPECT_EQ(net.layers()[0].params[1].shape(), (Shape{3}));
}

TEST(InitNetwork, ShapeMismatchNamesThePair) {
    try {
        init_network({{4}, {LayerSpec::dense(4, 3), LayerSpec::dense(5, 2)}}, 1);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("shape mismatch 3 vs 5"), std::string::npos) << e.what();
    }
}

TEST(InitNetwork, WeightsWithinGlorotBound) {
    const auto net = init_network({{40}, {LayerSpec::dense(40, 24)}}, 9);
    const double limit = std::sqrt(6.0 / 64.0);
    for (float v : net.layers()[0].params[0].values()) EXPECT_LE(std::abs(v), limit);
    for (float v : net.layers()[0].params[1].values()) EXPECT_EQ(v, 0.0f);
}

TEST(InitNetwork, HeadMustBeLast) {
    EXPECT_THROW(init_network({{4}, {LayerSpec::softmax_xent(), LayerSpec::dense(4, 2)}}, 1), ShapeError);
}

TEST(Forward, ReluOnVector) {
    const auto net = init_network({{3}, {LayerSpec::relu()}}, 1);
    const auto out = forward(net, Tensor({1, 3}, std::vector<float>{-1, 0, 2})).output();
    EXPECT_EQ(std::vector<float>(out.values().begin(), out.values().end()), (std::vector<float>{0, 0, 2}));
}

TEST(Forward, IdentityDense) {
    auto net = init_network({{3}, {LayerSpec::dense(3, 3)}}, 1);
    set_flat(net, 0, 0, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Tensor x({2, 3}, std::vector<float>{0.5f, -2, 7, 1, 2, 3});
    EXPECT_EQ(forward(net, x).output(), x);
}

TEST(Forward, TwoLayerMatchesHandComposition) {
    const auto net = init_network({{4}, {LayerSpec::dense(4, 5), LayerSpec::dense(5, 3)}}, 5);
    const auto x = random_tensor({3, 4}, 6);
    const auto out = forward(net, x).output();
    const auto& w1 = net.layers()[0].params[0];
    const auto& w2 = net.layers()[1].params[0];
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t o = 0; o < 3; ++o) {
            double acc = 0.0;  // biases start at zero
            for (std::size_t j = 0; j < 5; ++j) {
                double hj = 0.0;
                for (std::size_t i = 0; i < 4; ++i) hj += double(w1[j * 4 + i]) * x[b * 4 + i];
                acc += double(w2[o * 5 + j]) * hj;
            }
            EXPECT_NEAR(out[b * 3 + o], acc, 1e-5);
        }
}

TEST(Forward, MatchesDoubleReference) {
    const auto net = init_network(all_kinds(), 3);
    const auto x = random_tensor({4, 2, 5, 6}, 4);
    const auto out = forward(net, x).output();
    const auto ref = oracle::ref_forward(net, oracle::to_double(net), {x.values().begin(), x.values().end()}, 4);
    ASSERT_EQ(ref.out.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], ref.out[i], 1e-5);
}

TEST(Forward, WrongInputShapeThrows) {
    const auto net = init_network(dense_relu_dense(), 1);
    EXPECT_THROW(forward(net, Tensor({2, 5})), ShapeError);
}

TEST(Forward, TraceHoldsEveryLayer) {
    const auto net = init_network(all_kinds(), 1);
    const auto trace = forward(net, random_tensor({2, 2, 5, 6}, 2));
    EXPECT_EQ(trace.activations.size(), net.layer_count() + 1);
}

TEST(Loss, UniformLogitsGiveLogC) {
    const auto m = loss_and_accuracy(Tensor({3, 7}, 0.25f), {0, 3, 6});
    EXPECT_NEAR(m.loss, std::log(7.0), 1e-12);
    // Ties resolve to class 0.
    EXPECT_NEAR(m.accuracy, 1.0 / 3.0, 1e-12);
}

TEST(Loss, DominantLogitsGiveFullAccuracy) {
    Tensor logits({2, 3}, std::vector<float>{9, 0, 0, 0, 0, 9});
    EXPECT_EQ(loss_and_accuracy(logits, {0, 2}).accuracy, 1.0);
}

TEST(Loss, HandPickedBatch) {
    Tensor logits({2, 3}, std::vector<float>{1.0f, 2.0f, 0.5f, -1.0f, 0.0f, 3.0f});
    const Labels labels{1, 0};
    auto ce = [](double a, double b, double c, double target) {
        return -(target - std::log(std::exp(a) + std::exp(b) + std::exp(c)));
    };
    const double expect = 0.5 * (ce(1.0, 2.0, 0.5, 2.0) + ce(-1.0, 0.0, 3.0, -1.0));
    const auto m = loss_and_accuracy(logits, labels);
    EXPECT_NEAR(m.loss, expect, 1e-6);
    EXPECT_EQ(m.accuracy, 0.5);
    EXPECT_GE(m.loss, 0.0);
}

TEST(Loss, LabelOutOfRange) {
    EXPECT_THROW(loss_and_accuracy(Tensor({1, 3}), {3}), std::out_of_range);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    const auto net = init_network({{4}, {LayerSpec::dense(4, 5), LayerSpec::relu(), LayerSpec::dense(5, 3)}}, 2);
    const auto trace = forward(net, random_tensor({3, 4}, 3));
    const auto res = backward(net, trace, Tensor({3, 3}, 0.0f));
    EXPECT_EQ(res.grads, net.zero_gradients());
    for (float v : res.input_grad.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Backward, DenseReluDenseFiniteDifferences) {
    const auto net = init_network(dense_relu_dense(), 11);
    const auto x = random_tensor({6, 4}, 12);
    const auto labels = random_labels(6, 3, 13);
    const auto res = backward(net, forward(net, x), labels);
    const auto rep = oracle::finite_difference_check(net, x, labels, res.grads);
    EXPECT_GT(rep.checked, 0u);
    EXPECT_LT(rep.max_rel_error, 1e-3) << "worst layer " << rep.worst_layer;
}

TEST(Backward, EveryLayerKindFiniteDifferences) {
    const auto net = init_network(all_kinds(), 21);
    ASSERT_LE(param_count(net), 1000u);
    const auto x = random_tensor({5, 2, 5, 6}, 22);
    const auto labels = random_labels(5, 4, 23);
    const auto res = backward(net, forward(net, x), labels);
    const auto rep = oracle::finite_difference_check(net, x, labels, res.grads);
    EXPECT_GT(rep.checked, param_count(net) * 9 / 10);
    EXPECT_LT(rep.max_rel_error, 1e-3) << "worst layer " << rep.worst_layer;
}

TEST(Backward, SoftmaxMinusOneHotClosedForm) {
    // Single linear layer into the head, one sample: dW = (softmax(z) - e_y) x^T.
    const auto net = init_network({{3}, {LayerSpec::dense(3, 4), LayerSpec::softmax_xent()}}, 31);
    const Tensor x({1, 3}, std::vector<float>{0.3f, -1.2f, 2.0f});
    const Labels y{2};
    const auto trace = forward(net, x);
    const auto res = backward(net, trace, y);
    const auto& z = trace.output();
    double m = z[0];
    for (std::size_t k = 1; k < 4; ++k) m = std::max<double>(m, z[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < 4; ++k) sum += std::exp(z[k] - m);
    for (std::size_t k = 0; k < 4; ++k) {
        const double delta = std::exp(z[k] - m) / sum - (k == 2 ? 1.0 : 0.0);
        EXPECT_NEAR(res.grads.layers[0][1][k], delta, 1e-6);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(res.grads.layers[0][0][k * 3 + i], delta * x[i], 1e-6);
    }
}

TEST(Backward, LabelsRequireHead) {
    const auto net = init_network({{4}, {LayerSpec::dense(4, 3)}}, 1);
    const auto trace = forward(net, random_tensor({2, 4}, 1));
    EXPECT_THROW(backward(net, trace, Labels{0, 1}), ShapeError);
    const auto headed = init_network(dense_relu_dense(), 1);
    EXPECT_THROW(backward(headed, forward(headed, random_tensor({2, 4}, 1)), Tensor({2, 3})), ShapeError);
}

TEST(Backward, MismatchedTraceThrows) {
    const auto a = init_network(dense_relu_dense(), 1);
    const auto b = init_network(all_kinds(), 1);
    const auto trace = forward(b, random_tensor({2, 2, 5, 6}, 1));
    EXPECT_THROW(backward(a, trace, Labels{0, 1}), ShapeError);
}

TEST(Sgd, DirectSubstitution) {
    auto net = init_network({{1}, {LayerSpec::dense(1, 1)}}, 1);
    set_flat(net, 0, 0, {1.0f});
    set_flat(net, 0, 1, {2.0f});
    auto g = net.zero_gradients();
    g.layers[0][0].fill(1.0f);
    g.layers[0][1].fill(1.0f);
    sgd_step(net, g, 0.5);
    EXPECT_EQ(net.flat_parameters(), (std::vector<float>{0.5f, 1.5f}));
    sgd_step(net, g, 0.5);
    // Two steps with fixed eta and g: theta - 2 eta g.
    EXPECT_EQ(net.flat_parameters(), (std::vector<float>{0.0f, 1.0f}));
}

TEST(Sgd, ZeroGradientLeavesParameters) {
    auto net = init_network(all_kinds(), 4);
    const auto before = net.flat_parameters();
    sgd_step(net, net.zero_gradients(), 0.1);
    EXPECT_EQ(net.flat_parameters(), before);
}

TEST(Sgd, ShapeMismatchThrows) {
    auto net = init_network(dense_relu_dense(), 1);
    const auto other = init_network(all_kinds(), 1);
    EXPECT_THROW(sgd_step(net, other.zero_gradients(), 0.1), ShapeError);
}

TEST(Sgd, ShapesNeverChange) {
    auto net = init_network(all_kinds(), 5);
    const auto spec_before = net.spec().layers;
    const auto x = random_tensor({3, 2, 5, 6}, 6);
    for (int i = 0; i < 3; ++i) sgd_step(net, backward(net, forward(net, x), {0, 1, 2}).grads, 0.1);
    EXPECT_EQ(net.spec().layers, spec_before);
}

TEST(Determinism, RepeatedTrainingIsBitIdentical) {
    auto run = [] {
        auto net = init_network(all_kinds(), 7);
        for (int i = 0; i < 5; ++i) {
            const auto x = random_tensor({4, 2, 5, 6}, 100 + i);
            sgd_step(net, backward(net, forward(net, x), random_labels(4, 4, 200 + i)).grads, 0.05);
        }
        return net.flat_parameters();
    };
    EXPECT_EQ(run(), run());
}

TEST(Determinism, BackendsTrainIdentically) {
    auto run = [](Backend be) {
        auto net = init_network(default_architecture({1, 12, 12}, 5, 3, 8), 2, be);
        for (int i = 0; i < 3; ++i) {
            const auto x = random_tensor({8, 1, 12, 12}, 300 + i);
            sgd_step(net, backward(net, forward(net, x), random_labels(8, 5, 400 + i)).grads, 0.05);
        }
        return net.flat_parameters();
    };
    EXPECT_EQ(run(Backend::serial), run(Backend::parallel));
}

TEST(ParamCount, Examples) {
    EXPECT_EQ(param_count(init_network({{4}, {LayerSpec::dense(4, 3)}}, 1)), 15u);
    EXPECT_EQ(param_count(init_network({{6}, {LayerSpec::relu(), LayerSpec::relu()}}, 1)), 0u);
}

TEST(ParamCount, DefaultNetAudit) {
    // conv 8 * (1 * 3 * 3) + 8, dense (8 * 26 * 26) * 64 + 64, dense 64 * 10 + 10
    const std::size_t conv = 8 * 9 + 8;
    const std::size_t hidden = 8 * 26 * 26 * 64 + 64;
    const std::size_t out = 64 * 10 + 10;
    const auto net = init_network(default_architecture({1, 28, 28}, 10), 1);
    EXPECT_EQ(param_count(net), conv + hidden + out);
    EXPECT_EQ(net.layer_count(), 7u);
    for (const auto& l : net.layers())
        if (l.kind == LayerKind::relu || l.kind == LayerKind::flatten) EXPECT_EQ(l.param_count(), 0u);
}

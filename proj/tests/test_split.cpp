#include <gtest/gtest.h>

#include <cmath>

#include "fstl/error.hpp"
#include "fstl/split.hpp"
#include "support/reference.hpp"

using namespace fstl;
using fstl::oracle::random_labels;
using fstl::oracle::random_tensor;

namespace {

NetworkSpec small_default() { return default_architecture({1, 8, 8}, 4, 3, 6); }

// Concatenates client and server gradient groups.
GradientSet concat(const GradientSet& a, const GradientSet& b) {
    GradientSet out = a;
    out.layers.insert(out.layers.end(), b.layers.begin(), b.layers.end());
    return out;
}

}  // namespace

TEST(SplitNetwork, FiveLayersCutAtTwo) {
    const NetworkSpec spec{{4},
                           {LayerSpec::dense(4, 6), LayerSpec::relu(), LayerSpec::dense(6, 5), LayerSpec::relu(),
                            LayerSpec::dense(5, 3)}};
    const auto pair = split_network(init_network(spec, 1), {2});
    EXPECT_EQ(pair.client.layer_count(), 2u);
    EXPECT_EQ(pair.server.layer_count(), 3u);
}

TEST(SplitNetwork, OutOfRangeCuts) {
    const auto net = init_network(small_default(), 1);
    for (std::size_t k : {std::size_t{0}, std::size_t{1}, net.layer_count()}) {
        try {
            split_network(net, {k});
            FAIL() << "k=" << k;
        } catch (const ShapeError& e) {
            EXPECT_NE(std::string(e.what()).find("cut index out of interior range"), std::string::npos);
        }
    }
}

TEST(SplitNetwork, ParamCountsAddUpAtEveryCut) {
    const auto net = init_network(default_architecture({1, 28, 28}, 10), 3);
    for (std::size_t k = 2; k < net.layer_count(); ++k) {
        const auto pair = split_network(net, {k});
        EXPECT_EQ(param_count(pair.client) + param_count(pair.server), param_count(net)) << "k=" << k;
        EXPECT_EQ(join_networks(pair.client, pair.server), net);
    }
}

TEST(ClientForward, IdentityLikeClientPassesInput) {
    const auto pair = split_network(
        init_network({{5}, {LayerSpec::flatten(), LayerSpec::flatten(), LayerSpec::dense(5, 2),
                            LayerSpec::softmax_xent()}},
                     1),
        {2});
    const auto x = random_tensor({3, 5}, 2);
    const auto pass = client_forward(pair.client, x, {0, 1, 0}, 4);
    EXPECT_EQ(pass.smashed.activations, x);
    EXPECT_EQ(pass.smashed.labels, (Labels{0, 1, 0}));
    EXPECT_EQ(pass.smashed.vu_id, 4u);
}

TEST(ClientForward, ByteSizeIsFourPerValue) {
    const auto pair = split_network(init_network(small_default(), 1), {3});
    const auto pass = client_forward(pair.client, random_tensor({7, 1, 8, 8}, 3), random_labels(7, 4, 4), 0);
    const std::size_t width = 3 * 6 * 6;
    EXPECT_EQ(pass.smashed.per_sample_width(), width);
    EXPECT_EQ(pass.smashed.byte_size, 4u * 7u * width);
}

TEST(ClientForward, LabelCountMismatch) {
    const auto pair = split_network(init_network(small_default(), 1), {3});
    EXPECT_THROW(client_forward(pair.client, random_tensor({3, 1, 8, 8}, 3), {0, 1}, 0), ShapeError);
}

TEST(ServerForwardBackward, OneSampleTwoClassesByHand) {
    // server: dense(2 -> 2) + head; w = [[1, -1], [0.5, 2]], b = [0.1, -0.2]
    auto server = init_network({{2}, {LayerSpec::dense(2, 2), LayerSpec::softmax_xent()}}, 1);
    const std::vector<float> w{1.0f, -1.0f, 0.5f, 2.0f}, b{0.1f, -0.2f};
    std::copy(w.begin(), w.end(), server.layers()[0].params[0].values().begin());
    std::copy(b.begin(), b.end(), server.layers()[0].params[1].values().begin());
    SmashedBatch s{Tensor({1, 2}, std::vector<float>{0.4f, -0.3f}), {1}, 0, 8};
    const auto res = server_forward_backward(server, s);

    const double x0 = 0.4f, x1 = -0.3f;
    const double z0 = 0.1f + 1.0 * x0 - 1.0 * x1;
    const double z1 = -0.2f + 0.5 * x0 + 2.0 * x1;
    const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1)), p1 = 1.0 - p0;
    EXPECT_NEAR(res.metrics.loss, -std::log(p1), 1e-6);
    EXPECT_EQ(res.metrics.accuracy, z1 > z0 ? 1.0 : 0.0);
    // d loss / d x = W^T (p - e_1)
    const double g0 = p0, g1 = p1 - 1.0;
    EXPECT_NEAR(res.cut_grad.grad[0], 1.0 * g0 + 0.5 * g1, 1e-6);
    EXPECT_NEAR(res.cut_grad.grad[1], -1.0 * g0 + 2.0 * g1, 1e-6);
    EXPECT_NEAR(res.grads.layers[0][0][0], g0 * x0, 1e-6);
    EXPECT_NEAR(res.grads.layers[0][1][1], g1, 1e-6);
}

TEST(ServerForwardBackward, CutGradientShapeAtEveryCut) {
    const auto net = init_network(small_default(), 5);
    const auto x = random_tensor({4, 1, 8, 8}, 6);
    const auto labels = random_labels(4, 4, 7);
    for (std::size_t k = 2; k < net.layer_count(); ++k) {
        const auto pair = split_network(net, {k});
        const auto pass = client_forward(pair.client, x, labels, 0);
        const auto res = server_forward_backward(pair.server, pass.smashed);
        EXPECT_EQ(res.cut_grad.grad.shape(), pass.smashed.activations.shape()) << "k=" << k;
    }
}

TEST(ServerForwardBackward, UniformLogitsGiveLogC) {
    auto server = init_network({{3}, {LayerSpec::dense(3, 5), LayerSpec::softmax_xent()}}, 1);
    server.layers()[0].params[0].fill(0.0f);
    SmashedBatch s{random_tensor({2, 3}, 1), {0, 4}, 0, 24};
    EXPECT_NEAR(server_forward_backward(server, s).metrics.loss, std::log(5.0), 1e-6);
}

TEST(ServerForwardBackward, WidthMismatch) {
    const auto pair = split_network(init_network(small_default(), 1), {3});
    SmashedBatch s{Tensor({2, 5}), {0, 1}, 0, 40};
    EXPECT_THROW(server_forward_backward(pair.server, s), ShapeError);
}

TEST(ClientBackward, ZeroCutGradient) {
    const auto pair = split_network(init_network(small_default(), 1), {3});
    const auto pass = client_forward(pair.client, random_tensor({2, 1, 8, 8}, 2), {0, 1}, 0);
    CutGradient zero{Tensor(pass.smashed.activations.shape(), 0.0f), 0};
    EXPECT_EQ(client_backward(pair.client, pass.trace, zero), pair.client.zero_gradients());
}

TEST(ClientBackward, TraceMismatch) {
    const auto pair = split_network(init_network(small_default(), 1), {3});
    const auto pass = client_forward(pair.client, random_tensor({2, 1, 8, 8}, 2), {0, 1}, 0);
    CutGradient wrong{Tensor({3, pass.smashed.per_sample_width()}), 0};
    EXPECT_THROW(client_backward(pair.client, pass.trace, wrong), ShapeError);
}

TEST(SplitConsistency, ComposedForwardIsBitExact) {
    const auto net = init_network(default_architecture({1, 28, 28}, 10), 9);
    const auto x = random_tensor({5, 1, 28, 28}, 10);
    const auto full = forward(net, x).output();
    for (std::size_t k = 2; k < net.layer_count(); ++k) {
        const auto pair = split_network(net, {k});
        const auto pass = client_forward(pair.client, x, random_labels(5, 10, 1), 0);
        EXPECT_EQ(forward(pair.server, pass.smashed.activations).output(), full) << "k=" << k;
    }
}

TEST(GradientConsistency, SplitGradientsEqualFullBackward) {
    const auto net = init_network(small_default(), 11);
    const auto x = random_tensor({6, 1, 8, 8}, 12);
    const auto labels = random_labels(6, 4, 13);
    const auto full = backward(net, forward(net, x), labels).grads;
    for (std::size_t k = 2; k < net.layer_count(); ++k) {
        const auto pair = split_network(net, {k});
        const auto pass = client_forward(pair.client, x, labels, 0);
        const auto server = server_forward_backward(pair.server, pass.smashed);
        const auto client = client_backward(pair.client, pass.trace, server.cut_grad);
        EXPECT_EQ(concat(client, server.grads), full) << "k=" << k;
    }
}

TEST(ClientBackward, FiniteDifferencesThroughComposedLoss) {
    const NetworkSpec spec{{2, 5, 6},
                           {LayerSpec::conv2d(2, 3, 3, 2), LayerSpec::relu(), LayerSpec::flatten(),
                            LayerSpec::dense(45, 5), LayerSpec::relu(), LayerSpec::dense(5, 3),
                            LayerSpec::softmax_xent()}};
    const auto net = init_network(spec, 14);
    const auto x = random_tensor({4, 2, 5, 6}, 15);
    const auto labels = random_labels(4, 3, 16);
    const auto pair = split_network(net, {3});
    const auto pass = client_forward(pair.client, x, labels, 0);
    const auto server = server_forward_backward(pair.server, pass.smashed);
    const auto client = client_backward(pair.client, pass.trace, server.cut_grad);
    // Server rows come from the full backward pass; the client rows are under test.
    GradientSet combined = client;
    const auto full = backward(net, forward(net, x), labels).grads;
    for (std::size_t i = pair.client.layer_count(); i < net.layer_count(); ++i) combined.layers.push_back(full.layers[i]);
    const auto rep = oracle::finite_difference_check(net, x, labels, combined);
    EXPECT_GT(rep.checked, 0u);
    EXPECT_LT(rep.max_rel_error, 1e-3);
}

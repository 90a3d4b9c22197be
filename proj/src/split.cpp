#include "fstl/split.hpp"

#include <iterator>

#include "fstl/error.hpp"

namespace fstl {

void validate_cut(std::size_t layer_count, SplitSpec spec) {
    if (!(spec.k > 1 && spec.k < layer_count))
        throw ShapeError("cut index out of interior range: k=" + std::to_string(spec.k) + " with " +
                         std::to_string(layer_count) + " layers (need 1 < k < L)");
}

SplitPair split_network(Network net, SplitSpec spec) {
    validate_cut(net.layer_count(), spec);
    auto& layers = net.layers();
    const auto cut = layers.begin() + static_cast<std::ptrdiff_t>(spec.k);
    std::vector<Layer> front(std::make_move_iterator(layers.begin()), std::make_move_iterator(cut));
    std::vector<Layer> back(std::make_move_iterator(cut), std::make_move_iterator(layers.end()));
    const Shape cut_shape = front.back().output_shape;
    return SplitPair{Network(net.input_shape(), std::move(front), net.seed(), net.backend()),
                     Network(cut_shape, std::move(back), net.seed(), net.backend())};
}

Network join_networks(const Network& client, const Network& server) {
    if (client.output_shape() != server.input_shape())
        throw ShapeError("client output " + shape_to_string(client.output_shape()) + " does not feed server input " +
                         shape_to_string(server.input_shape()));
    std::vector<Layer> layers = client.layers();
    layers.insert(layers.end(), server.layers().begin(), server.layers().end());
    return Network(client.input_shape(), std::move(layers), client.seed(), client.backend());
}

ClientPass client_forward(const Network& client, const Tensor& batch, const Labels& labels, std::uint32_t vu_id) {
    if (labels.size() != batch.rows())
        throw ShapeError("label count " + std::to_string(labels.size()) + " vs batch rows " +
                         std::to_string(batch.rows()));
    ClientPass pass;
    pass.trace = forward(client, batch);
    pass.smashed.activations = pass.trace.output();
    pass.smashed.labels = labels;
    pass.smashed.vu_id = vu_id;
    pass.smashed.byte_size = static_cast<std::uint64_t>(pass.smashed.activations.size()) * sizeof(float);
    return pass;
}

ServerPass server_forward_backward(const Network& server, const SmashedBatch& smashed) {
    const auto trace = forward(server, smashed.activations);
    ServerPass pass;
    pass.metrics = loss_and_accuracy(trace.output(), smashed.labels);
    auto result = backward(server, trace, smashed.labels);
    pass.grads = std::move(result.grads);
    pass.cut_grad = CutGradient{std::move(result.input_grad), smashed.vu_id};
    return pass;
}

GradientSet client_backward(const Network& client, const ActivationTrace& trace, const CutGradient& cut_grad) {
    return backward(client, trace, cut_grad.grad).grads;
}

}  // namespace fstl

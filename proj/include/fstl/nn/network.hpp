#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fstl/nn/kernels.hpp"
#include "fstl/nn/tensor.hpp"

namespace fstl {

enum class LayerKind : std::uint32_t {
    dense = 1,
    relu = 2,
    flatten = 3,
    conv2d = 4,
    softmax_xent = 5,  // terminal head: passes logits through, owns the loss
};

const char* layer_kind_name(LayerKind k);

/// Layer description used to build a network. Dense and conv layers declare
/// their own input sizes so composition errors are caught at construction.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;   // dense: input width; conv2d: input channels
    std::size_t out = 0;  // dense: output width; conv2d: output channels
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;

    static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, in, out, 0, 0}; }
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec flatten() { return {LayerKind::flatten}; }
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw) {
        return {LayerKind::conv2d, in_ch, out_ch, kh, kw};
    }
    static LayerSpec softmax_xent() { return {LayerKind::softmax_xent}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample input shape plus the ordered layers.
struct NetworkSpec {
    Shape input;
    std::vector<LayerSpec> layers;
};

/// conv2d(1->8, 3x3) -> relu -> flatten -> dense->64 -> relu -> dense->classes -> softmax head.
NetworkSpec default_architecture(const Shape& input, std::size_t classes, std::size_t conv_channels = 8,
                                 std::size_t hidden = 64);

struct Layer {
    LayerKind kind;
    Shape input_shape;   // per sample
    Shape output_shape;  // per sample
    /// weight then bias for dense/conv2d; empty for parameter-free kinds.
    std::vector<Tensor> params;

    LayerSpec spec() const;
    std::size_t param_count() const;
    /// Multiply-accumulates for one forward pass over `batch` samples.
    std::uint64_t forward_macs(std::size_t batch) const;
    /// Multiply-accumulates for one backward pass (parameter and input gradients).
    std::uint64_t backward_macs(std::size_t batch) const;

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Parameter or gradient tensors grouped by layer: group i mirrors layer i,
/// and is empty for parameter-free layers.
using TensorGroups = std::vector<std::vector<Tensor>>;

struct GradientSet {
    TensorGroups layers;

    std::size_t element_count() const;
    friend bool operator==(const GradientSet&, const GradientSet&) = default;
};

struct ParameterSet {
    TensorGroups layers;

    std::size_t element_count() const;
    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

class Network {
public:
    Network() = default;
    Network(Shape input, std::vector<Layer> layers, std::uint64_t seed, Backend backend = Backend::parallel);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    std::size_t layer_count() const { return layers_.size(); }
    const Shape& input_shape() const { return input_; }
    const Shape& output_shape() const;
    std::uint64_t seed() const { return seed_; }
    Backend backend() const { return backend_; }
    void set_backend(Backend b) { backend_ = b; }

    bool has_head() const;
    NetworkSpec spec() const;

    ParameterSet parameters() const;
    void set_parameters(const ParameterSet& params);
    /// All parameters flattened, layer order, weight before bias.
    std::vector<float> flat_parameters() const;

    /// Zero-filled gradient set shaped like this network.
    GradientSet zero_gradients() const;

    friend bool operator==(const Network&, const Network&) = default;

private:
    Shape input_;
    std::vector<Layer> layers_;
    std::uint64_t seed_ = 0;
    Backend backend_ = Backend::parallel;
};

/// Builds and initialises a network. Weights are drawn uniformly from
/// +-sqrt(6 / (fan_in + fan_out)) layer by layer from one seeded stream;
/// biases start at zero. Throws ShapeError naming the first incompatible pair.
Network init_network(const NetworkSpec& spec, std::uint64_t seed, Backend backend = Backend::parallel);

/// activations[0] is the input batch, activations[i + 1] the output of layer i.
struct ActivationTrace {
    std::vector<Tensor> activations;

    const Tensor& output() const { return activations.back(); }
};

ActivationTrace forward(const Network& net, const Tensor& batch);

using Labels = std::vector<std::uint32_t>;

struct LossAccuracy {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean softmax cross-entropy and argmax accuracy (ties go to the lowest index).
LossAccuracy loss_and_accuracy(const Tensor& logits, const Labels& labels);

struct BackwardResult {
    GradientSet grads;
    Tensor input_grad;
};

/// Backward pass for a network ending in a softmax head; the loss is the
/// batch mean of the cross-entropy.
BackwardResult backward(const Network& net, const ActivationTrace& trace, const Labels& labels);
/// Backward pass for a headless network given d(loss)/d(output).
BackwardResult backward(const Network& net, const ActivationTrace& trace, const Tensor& upstream);

/// theta <- theta - eta * g for every parameter.
void sgd_step(Network& net, const GradientSet& grads, double eta);

std::size_t param_count(const Network& net);

std::uint64_t forward_macs(const Network& net, std::size_t batch);
std::uint64_t training_macs(const Network& net, std::size_t batch);

}  // namespace fstl

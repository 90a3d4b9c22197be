#include "fstl/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fstl/error.hpp"
#include "fstl/nn/rng.hpp"

namespace fstl {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::softmax_xent: return "softmax_xent";
    }
    return "unknown";
}

NetworkSpec default_architecture(const Shape& input, std::size_t classes, std::size_t conv_channels,
                                 std::size_t hidden) {
    if (input.size() != 3) throw ShapeError("default architecture expects a [channels,height,width] input");
    if (input[1] < 3 || input[2] < 3) throw ShapeError("default architecture needs inputs of at least 3x3");
    const std::size_t flat = conv_channels * (input[1] - 2) * (input[2] - 2);
    return NetworkSpec{input,
                       {LayerSpec::conv2d(input[0], conv_channels, 3, 3), LayerSpec::relu(), LayerSpec::flatten(),
                        LayerSpec::dense(flat, hidden), LayerSpec::relu(), LayerSpec::dense(hidden, classes),
                        LayerSpec::softmax_xent()}};
}

LayerSpec Layer::spec() const {
    switch (kind) {
        case LayerKind::dense: return LayerSpec::dense(input_shape[0], output_shape[0]);
        case LayerKind::conv2d:
            return LayerSpec::conv2d(input_shape[0], output_shape[0], params[0].dim(2), params[0].dim(3));
        case LayerKind::relu: return LayerSpec::relu();
        case LayerKind::flatten: return LayerSpec::flatten();
        case LayerKind::softmax_xent: return LayerSpec::softmax_xent();
    }
    return {};
}

std::size_t Layer::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

std::uint64_t Layer::forward_macs(std::size_t batch) const {
    switch (kind) {
        case LayerKind::dense:
            return static_cast<std::uint64_t>(batch) * input_shape[0] * output_shape[0];
        case LayerKind::conv2d:
            return static_cast<std::uint64_t>(batch) * shape_elements(output_shape) * input_shape[0] *
                   params[0].dim(2) * params[0].dim(3);
        case LayerKind::relu:
        case LayerKind::softmax_xent:
            return static_cast<std::uint64_t>(batch) * shape_elements(input_shape);
        case LayerKind::flatten: return 0;
    }
    return 0;
}

std::uint64_t Layer::backward_macs(std::size_t batch) const {
    switch (kind) {
        case LayerKind::dense:
        case LayerKind::conv2d: return 2 * forward_macs(batch);
        default: return forward_macs(batch);
    }
}

std::size_t GradientSet::element_count() const {
    std::size_t n = 0;
    for (const auto& g : layers)
        for (const auto& t : g) n += t.size();
    return n;
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& g : layers)
        for (const auto& t : g) n += t.size();
    return n;
}

Network::Network(Shape input, std::vector<Layer> layers, std::uint64_t seed, Backend backend)
    : input_(std::move(input)), layers_(std::move(layers)), seed_(seed), backend_(backend) {
    if (layers_.empty()) throw ShapeError("a network needs at least one layer");
    Shape running = input_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].input_shape != running)
            throw ShapeError("layer " + std::to_string(i) + ": input shape " +
                             shape_to_string(layers_[i].input_shape) + " does not follow " + shape_to_string(running));
        if (layers_[i].kind == LayerKind::softmax_xent && i + 1 != layers_.size())
            throw ShapeError("softmax head must be the last layer");
        running = layers_[i].output_shape;
    }
}

const Shape& Network::output_shape() const { return layers_.back().output_shape; }

bool Network::has_head() const { return !layers_.empty() && layers_.back().kind == LayerKind::softmax_xent; }

NetworkSpec Network::spec() const {
    NetworkSpec s{input_, {}};
    for (const auto& l : layers_) s.layers.push_back(l.spec());
    return s;
}

ParameterSet Network::parameters() const {
    ParameterSet out;
    out.layers.reserve(layers_.size());
    for (const auto& l : layers_) out.layers.push_back(l.params);
    return out;
}

void Network::set_parameters(const ParameterSet& params) {
    if (params.layers.size() != layers_.size())
        throw ShapeError("parameter set has " + std::to_string(params.layers.size()) + " layers, network has " +
                         std::to_string(layers_.size()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& src = params.layers[i];
        auto& dst = layers_[i].params;
        if (src.size() != dst.size())
            throw ShapeError("layer " + std::to_string(i) + ": parameter tensor count mismatch");
        for (std::size_t j = 0; j < dst.size(); ++j)
            if (src[j].shape() != dst[j].shape())
                throw ShapeError("layer " + std::to_string(i) + ": parameter shape " + shape_to_string(src[j].shape()) +
                                 " vs " + shape_to_string(dst[j].shape()));
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].params = params.layers[i];
}

std::vector<float> Network::flat_parameters() const {
    std::vector<float> out;
    for (const auto& l : layers_)
        for (const auto& p : l.params) out.insert(out.end(), p.values().begin(), p.values().end());
    return out;
}

GradientSet Network::zero_gradients() const {
    GradientSet g;
    for (const auto& l : layers_) {
        std::vector<Tensor> group;
        for (const auto& p : l.params) group.emplace_back(p.shape(), 0.0f);
        g.layers.push_back(std::move(group));
    }
    return g;
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed, Backend backend) {
    if (spec.layers.empty()) throw ShapeError("network spec has no layers");
    if (spec.input.empty()) throw ShapeError("network spec has no input shape");
    Rng rng(seed);
    std::vector<Layer> layers;
    Shape running = spec.input;

    auto fail = [&](std::size_t i, const std::string& why) {
        throw ShapeError("layer " + std::to_string(i) + " (" + layer_kind_name(spec.layers[i].kind) + "): " + why);
    };
    auto uniform_tensor = [&](Shape shape, std::size_t fan_in, std::size_t fan_out) {
        Tensor t(std::move(shape));
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-limit, limit));
        return t;
    };

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& ls = spec.layers[i];
        Layer layer{ls.kind, running, running, {}};
        switch (ls.kind) {
            case LayerKind::dense: {
                if (ls.in == 0 || ls.out == 0) fail(i, "dense sizes must be positive");
                if (running.size() != 1) fail(i, "expects a flat input, got " + shape_to_string(running));
                if (running[0] != ls.in)
                    fail(i, "shape mismatch " + std::to_string(running[0]) + " vs " + std::to_string(ls.in));
                layer.output_shape = {ls.out};
                layer.params.push_back(uniform_tensor({ls.out, ls.in}, ls.in, ls.out));
                layer.params.emplace_back(Shape{ls.out}, 0.0f);
                break;
            }
            case LayerKind::conv2d: {
                if (ls.in == 0 || ls.out == 0 || ls.kernel_h == 0 || ls.kernel_w == 0)
                    fail(i, "conv2d sizes must be positive");
                if (running.size() != 3) fail(i, "expects a [channels,height,width] input, got " + shape_to_string(running));
                if (running[0] != ls.in)
                    fail(i, "shape mismatch " + std::to_string(running[0]) + " vs " + std::to_string(ls.in));
                if (ls.kernel_h > running[1] || ls.kernel_w > running[2]) fail(i, "kernel larger than input");
                layer.output_shape = {ls.out, running[1] - ls.kernel_h + 1, running[2] - ls.kernel_w + 1};
                const std::size_t taps = ls.kernel_h * ls.kernel_w;
                layer.params.push_back(
                    uniform_tensor({ls.out, ls.in, ls.kernel_h, ls.kernel_w}, ls.in * taps, ls.out * taps));
                layer.params.emplace_back(Shape{ls.out}, 0.0f);
                break;
            }
            case LayerKind::flatten: layer.output_shape = {shape_elements(running)}; break;
            case LayerKind::relu: break;
            case LayerKind::softmax_xent:
                if (running.size() != 1) fail(i, "softmax head expects flat logits, got " + shape_to_string(running));
                if (i + 1 != spec.layers.size()) fail(i, "softmax head must be the last layer");
                break;
            default: fail(i, "unknown layer kind");
        }
        running = layer.output_shape;
        layers.push_back(std::move(layer));
    }
    return Network(spec.input, std::move(layers), seed, backend);
}

namespace {

Shape batched(std::size_t batch, const Shape& per_sample) {
    Shape s{batch};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

kernels::ConvDims conv_dims(const Layer& l, std::size_t batch) {
    return {batch, l.input_shape[0], l.output_shape[0], l.input_shape[1], l.input_shape[2], l.params[0].dim(2),
            l.params[0].dim(3)};
}

Tensor layer_forward(const Layer& l, const Tensor& x, Backend be) {
    const std::size_t batch = x.rows();
    switch (l.kind) {
        case LayerKind::dense: {
            Tensor y(batched(batch, l.output_shape));
            kernels::dense_forward(be, {batch, l.input_shape[0], l.output_shape[0]}, x.values(), l.params[0].values(),
                                   l.params[1].values(), y.values());
            return y;
        }
        case LayerKind::conv2d: {
            Tensor y(batched(batch, l.output_shape));
            kernels::conv2d_forward(be, conv_dims(l, batch), x.values(), l.params[0].values(), l.params[1].values(),
                                    y.values());
            return y;
        }
        case LayerKind::relu: {
            Tensor y(x.shape());
            kernels::relu_forward(be, x.values(), y.values());
            return y;
        }
        case LayerKind::flatten: return x.reshaped(batched(batch, l.output_shape));
        case LayerKind::softmax_xent: return x;
    }
    return x;
}

void check_trace(const Network& net, const ActivationTrace& trace) {
    if (trace.activations.size() != net.layer_count() + 1)
        throw ShapeError("activation trace has " + std::to_string(trace.activations.size()) +
                         " entries, network needs " + std::to_string(net.layer_count() + 1));
    const std::size_t batch = trace.activations[0].rows();
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto& l = net.layers()[i];
        if (trace.activations[i].shape() != batched(batch, l.input_shape) ||
            trace.activations[i + 1].shape() != batched(batch, l.output_shape))
            throw ShapeError("activation trace does not match layer " + std::to_string(i));
    }
}

/// Gradients flow from layer `from - 1` down to layer 0 starting with `grad`.
BackwardResult backward_from(const Network& net, const ActivationTrace& trace, Tensor grad, std::size_t from) {
    const Backend be = net.backend();
    const std::size_t batch = trace.activations[0].rows();
    GradientSet grads = net.zero_gradients();
    for (std::size_t li = from; li-- > 0;) {
        const Layer& l = net.layers()[li];
        const Tensor& x = trace.activations[li];
        switch (l.kind) {
            case LayerKind::dense: {
                const kernels::DenseDims d{batch, l.input_shape[0], l.output_shape[0]};
                auto& g = grads.layers[li];
                kernels::dense_backward_params(be, d, grad.values(), x.values(), g[0].values(), g[1].values());
                Tensor dx(x.shape());
                kernels::dense_backward_input(be, d, grad.values(), l.params[0].values(), dx.values());
                grad = std::move(dx);
                break;
            }
            case LayerKind::conv2d: {
                const auto d = conv_dims(l, batch);
                auto& g = grads.layers[li];
                kernels::conv2d_backward_params(be, d, grad.values(), x.values(), g[0].values(), g[1].values());
                Tensor dx(x.shape());
                kernels::conv2d_backward_input(be, d, grad.values(), l.params[0].values(), dx.values());
                grad = std::move(dx);
                break;
            }
            case LayerKind::relu: {
                Tensor dx(x.shape());
                kernels::relu_backward(be, x.values(), grad.values(), dx.values());
                grad = std::move(dx);
                break;
            }
            case LayerKind::flatten: grad = grad.reshaped(x.shape()); break;
            case LayerKind::softmax_xent:
                throw ShapeError("softmax head must be handled by the labelled backward pass");
        }
    }
    return {std::move(grads), std::move(grad)};
}

void check_labels(const Tensor& logits, const Labels& labels) {
    if (logits.rank() != 2) throw ShapeError("logits must be [batch, classes], got " + shape_to_string(logits.shape()));
    if (labels.size() != logits.rows())
        throw ShapeError("label count " + std::to_string(labels.size()) + " vs " + std::to_string(logits.rows()) +
                         " logit rows");
    const std::size_t classes = logits.dim(1);
    for (auto y : labels)
        if (y >= classes)
            throw std::out_of_range("label " + std::to_string(y) + " out of range for " + std::to_string(classes) +
                                    " classes");
}

}  // namespace

ActivationTrace forward(const Network& net, const Tensor& batch) {
    if (batch.rank() < 1 || batch.rows() == 0) throw ShapeError("empty batch");
    const Shape expected = batched(batch.rows(), net.input_shape());
    if (batch.shape() != expected)
        throw ShapeError("batch shape " + shape_to_string(batch.shape()) + " does not match network input " +
                         shape_to_string(expected));
    ActivationTrace trace;
    trace.activations.reserve(net.layer_count() + 1);
    trace.activations.push_back(batch);
    for (const auto& l : net.layers()) trace.activations.push_back(layer_forward(l, trace.activations.back(), net.backend()));
    return trace;
}

LossAccuracy loss_and_accuracy(const Tensor& logits, const Labels& labels) {
    check_labels(logits, labels);
    const std::size_t classes = logits.dim(1);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < logits.rows(); ++b) {
        const auto row = logits.row(b);
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (row[c] > row[best]) best = c;
        double sum = 0.0;
        const double m = row[best];
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c]) - m);
        loss_sum += m + std::log(sum) - static_cast<double>(row[labels[b]]);
        if (best == labels[b]) ++correct;
    }
    const auto n = static_cast<double>(logits.rows());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

BackwardResult backward(const Network& net, const ActivationTrace& trace, const Labels& labels) {
    if (!net.has_head()) throw ShapeError("labelled backward needs a network ending in a softmax head");
    check_trace(net, trace);
    const Tensor& logits = trace.output();
    check_labels(logits, labels);
    const std::size_t batch = logits.rows(), classes = logits.dim(1);
    Tensor grad(logits.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const auto row = logits.row(b);
        const double m = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c]) - m);
        auto out = grad.row(b);
        for (std::size_t c = 0; c < classes; ++c) {
            double p = std::exp(static_cast<double>(row[c]) - m) / sum;
            if (c == labels[b]) p -= 1.0;
            out[c] = static_cast<float>(p / static_cast<double>(batch));
        }
    }
    return backward_from(net, trace, std::move(grad), net.layer_count() - 1);
}

BackwardResult backward(const Network& net, const ActivationTrace& trace, const Tensor& upstream) {
    if (net.has_head()) throw ShapeError("network has a softmax head; pass labels instead of an upstream gradient");
    check_trace(net, trace);
    if (upstream.shape() != trace.output().shape())
        throw ShapeError("upstream gradient shape " + shape_to_string(upstream.shape()) + " vs output " +
                         shape_to_string(trace.output().shape()));
    return backward_from(net, trace, upstream, net.layer_count());
}

void sgd_step(Network& net, const GradientSet& grads, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learning rate must be positive");
    if (grads.layers.size() != net.layer_count()) throw ShapeError("gradient set does not match network layers");
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto& g = grads.layers[i];
        const auto& p = net.layers()[i].params;
        if (g.size() != p.size()) throw ShapeError("layer " + std::to_string(i) + ": gradient tensor count mismatch");
        for (std::size_t j = 0; j < p.size(); ++j)
            if (g[j].shape() != p[j].shape())
                throw ShapeError("layer " + std::to_string(i) + ": gradient shape " + shape_to_string(g[j].shape()) +
                                 " vs parameter " + shape_to_string(p[j].shape()));
    }
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        auto& params = net.layers()[i].params;
        for (std::size_t j = 0; j < params.size(); ++j) {
            auto theta = params[j].values();
            const auto g = grads.layers[i][j].values();
            for (std::size_t e = 0; e < theta.size(); ++e)
                theta[e] = static_cast<float>(static_cast<double>(theta[e]) - eta * static_cast<double>(g[e]));
        }
    }
}

std::size_t param_count(const Network& net) {
    std::size_t n = 0;
    for (const auto& l : net.layers()) n += l.param_count();
    return n;
}

std::uint64_t forward_macs(const Network& net, std::size_t batch) {
    std::uint64_t n = 0;
    for (const auto& l : net.layers()) n += l.forward_macs(batch);
    return n;
}

std::uint64_t training_macs(const Network& net, std::size_t batch) {
    std::uint64_t n = 0;
    for (const auto& l : net.layers()) n += l.forward_macs(batch) + l.backward_macs(batch);
    return n;
}

}  // namespace fstl

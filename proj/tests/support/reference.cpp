#include "support/reference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "fstl/nn/rng.hpp"

namespace fstl::oracle {

Params to_double(const Network& net) {
    Params out;
    for (const auto& layer : net.layers()) {
        std::vector<double> flat;
        for (const auto& t : layer.params)
            for (float v : t.values()) flat.push_back(v);
        out.push_back(std::move(flat));
    }
    return out;
}

RefOutput ref_forward(const Network& net, const Params& params, const std::vector<double>& input, std::size_t batch,
                      const Labels* labels) {
    RefOutput res;
    std::vector<double> act = input;
    for (std::size_t li = 0; li < net.layer_count(); ++li) {
        const Layer& layer = net.layers()[li];
        const std::size_t in_w = shape_elements(layer.input_shape);
        const std::size_t out_w = shape_elements(layer.output_shape);
        std::vector<double> next(batch * out_w, 0.0);
        const auto& p = params[li];
        switch (layer.kind) {
            case LayerKind::dense: {
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t o = 0; o < out_w; ++o) {
                        double s = p[out_w * in_w + o];
                        for (std::size_t i = 0; i < in_w; ++i) s += p[o * in_w + i] * act[b * in_w + i];
                        next[b * out_w + o] = s;
                    }
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t ci_n = layer.input_shape[0], h = layer.input_shape[1], w = layer.input_shape[2];
                const std::size_t co_n = layer.output_shape[0], oh = layer.output_shape[1], ow = layer.output_shape[2];
                const std::size_t kh = h - oh + 1, kw = w - ow + 1;
                const std::size_t wsize = co_n * ci_n * kh * kw;
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t co = 0; co < co_n; ++co)
                        for (std::size_t y = 0; y < oh; ++y)
                            for (std::size_t x = 0; x < ow; ++x) {
                                double s = p[wsize + co];
                                for (std::size_t ci = 0; ci < ci_n; ++ci)
                                    for (std::size_t ky = 0; ky < kh; ++ky)
                                        for (std::size_t kx = 0; kx < kw; ++kx)
                                            s += p[((co * ci_n + ci) * kh + ky) * kw + kx] *
                                                 act[b * in_w + (ci * h + y + ky) * w + x + kx];
                                next[b * out_w + (co * oh + y) * ow + x] = s;
                            }
                break;
            }
            case LayerKind::relu:
                for (std::size_t i = 0; i < act.size(); ++i) {
                    res.relu_mask.push_back(act[i] > 0.0);
                    next[i] = act[i] > 0.0 ? act[i] : 0.0;
                }
                break;
            case LayerKind::flatten:
            case LayerKind::softmax_xent:
                next = act;
                break;
        }
        act = std::move(next);
    }
    res.out = act;
    if (labels) {
        const std::size_t c = act.size() / batch;
        double total = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double* z = act.data() + b * c;
            const double m = *std::max_element(z, z + c);
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) sum += std::exp(z[k] - m);
            total += std::log(sum) + m - z[(*labels)[b]];
        }
        res.loss = total / static_cast<double>(batch);
    }
    return res;
}

FdReport finite_difference_check(const Network& net, const Tensor& batch, const Labels& labels,
                                 const GradientSet& analytic, double step, double floor) {
    const std::vector<double> input(batch.values().begin(), batch.values().end());
    const std::size_t n = batch.rows();
    Params params = to_double(net);
    const auto base = ref_forward(net, params, input, n, &labels);
    FdReport rep;
    for (std::size_t li = 0; li < params.size(); ++li) {
        std::vector<float> flat;
        for (const auto& t : analytic.layers[li])
            for (float v : t.values()) flat.push_back(v);
        if (flat.size() != params[li].size()) throw std::logic_error("gradient layout mismatch");
        for (std::size_t j = 0; j < params[li].size(); ++j) {
            const double keep = params[li][j];
            params[li][j] = keep + step;
            const auto plus = ref_forward(net, params, input, n, &labels);
            params[li][j] = keep - step;
            const auto minus = ref_forward(net, params, input, n, &labels);
            params[li][j] = keep;
            if (plus.relu_mask != base.relu_mask || minus.relu_mask != base.relu_mask) {
                ++rep.skipped_kinks;
                continue;
            }
            const double numeric = (plus.loss - minus.loss) / (2.0 * step);
            const double a = flat[j];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            ++rep.checked;
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_layer = li;
            }
        }
    }
    return rep;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, float lo, float hi) {
    Rng rng(seed);
    Tensor t(shape);
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

Labels random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    Labels out(n);
    for (auto& l : out) l = static_cast<std::uint32_t>(rng.below(classes));
    return out;
}

std::vector<Network> centralized_trajectory(Network net, const Shard& data, const RoundConfig& cfg) {
    std::vector<Network> after_round;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
            const auto order = batch_order(cfg.seed, 0, r, e, data.size());
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const std::span<const std::size_t> rows(order.data() + start, end - start);
                Labels labels;
                for (auto i : rows) labels.push_back(data.labels[i]);
                const auto trace = forward(net, data.features.gather_rows(rows));
                sgd_step(net, backward(net, trace, labels).grads, cfg.eta);
            }
        }
        after_round.push_back(net);
    }
    return after_round;
}

std::uint64_t max_ulp_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
    auto key = [](float f) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        return (u & 0x80000000u) ? std::int64_t{0x80000000} - std::int64_t(u & 0x7fffffffu)
                                 : std::int64_t{0x80000000} + std::int64_t(u);
    };
    std::uint64_t worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto d = key(a[i]) - key(b[i]);
        worst = std::max<std::uint64_t>(worst, static_cast<std::uint64_t>(d < 0 ? -d : d));
    }
    return worst;
}

}  // namespace fstl::oracle

// Reference kernels: one output at a time, textbook loop order.

#include "kernels_impl.hpp"

namespace fstl::kernels::serial {

void dense_forward(DenseDims d, const float* x, const float* w, const float* bias, float* y) {
    for (std::size_t b = 0; b < d.batch; ++b) {
        const float* xb = x + b * d.in;
        for (std::size_t o = 0; o < d.out; ++o) {
            const float* wo = w + o * d.in;
            double acc = bias[o];
            for (std::size_t i = 0; i < d.in; ++i) acc += static_cast<double>(wo[i]) * xb[i];
            y[b * d.out + o] = static_cast<float>(acc);
        }
    }
}

void dense_backward_params(DenseDims d, const float* g, const float* x, float* dw, float* db) {
    for (std::size_t o = 0; o < d.out; ++o) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b)
                acc += static_cast<double>(g[b * d.out + o]) * x[b * d.in + i];
            dw[o * d.in + i] = static_cast<float>(acc);
        }
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) acc += g[b * d.out + o];
        db[o] = static_cast<float>(acc);
    }
}

void dense_backward_input(DenseDims d, const float* g, const float* w, float* dx) {
    for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t i = 0; i < d.in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < d.out; ++o)
                acc += static_cast<double>(g[b * d.out + o]) * w[o * d.in + i];
            dx[b * d.in + i] = static_cast<float>(acc);
        }
    }
}

void conv2d_forward(const ConvDims& d, const float* x, const float* w, const float* bias, float* y) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t co = 0; co < d.out_channels; ++co)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = bias[co];
                    for (std::size_t ci = 0; ci < d.in_channels; ++ci)
                        for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
                            for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                                const float wv = w[((co * d.in_channels + ci) * d.kernel_h + ky) * d.kernel_w + kx];
                                const float xv = x[((b * d.in_channels + ci) * d.height + oy + ky) * d.width + ox + kx];
                                acc += static_cast<double>(wv) * xv;
                            }
                    y[((b * d.out_channels + co) * oh + oy) * ow + ox] = static_cast<float>(acc);
                }
}

void conv2d_backward_params(const ConvDims& d, const float* g, const float* x, float* dw, float* db) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    for (std::size_t co = 0; co < d.out_channels; ++co) {
        for (std::size_t ci = 0; ci < d.in_channels; ++ci)
            for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
                for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                    double acc = 0.0;
                    for (std::size_t b = 0; b < d.batch; ++b)
                        for (std::size_t oy = 0; oy < oh; ++oy)
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const float gv = g[((b * d.out_channels + co) * oh + oy) * ow + ox];
                                const float xv = x[((b * d.in_channels + ci) * d.height + oy + ky) * d.width + ox + kx];
                                acc += static_cast<double>(gv) * xv;
                            }
                    dw[((co * d.in_channels + ci) * d.kernel_h + ky) * d.kernel_w + kx] = static_cast<float>(acc);
                }
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b)
            for (std::size_t p = 0; p < oh * ow; ++p) acc += g[(b * d.out_channels + co) * oh * ow + p];
        db[co] = static_cast<float>(acc);
    }
}

void conv2d_backward_input(const ConvDims& d, const float* g, const float* w, float* dx) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t ci = 0; ci < d.in_channels; ++ci)
            for (std::size_t iy = 0; iy < d.height; ++iy)
                for (std::size_t ix = 0; ix < d.width; ++ix) {
                    double acc = 0.0;
                    for (std::size_t co = 0; co < d.out_channels; ++co)
                        for (std::size_t ky = 0; ky < d.kernel_h; ++ky) {
                            if (iy < ky || iy - ky >= oh) continue;
                            for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                                if (ix < kx || ix - kx >= ow) continue;
                                const float gv = g[((b * d.out_channels + co) * oh + iy - ky) * ow + ix - kx];
                                const float wv = w[((co * d.in_channels + ci) * d.kernel_h + ky) * d.kernel_w + kx];
                                acc += static_cast<double>(gv) * wv;
                            }
                        }
                    dx[((b * d.in_channels + ci) * d.height + iy) * d.width + ix] = static_cast<float>(acc);
                }
}

void relu_forward(std::size_t n, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::size_t n, const float* x, const float* g, float* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

}  // namespace fstl::kernels::serial

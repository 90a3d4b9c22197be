// OpenMP kernels. Loops are reordered so the innermost loop runs over
// contiguous outputs, but each output still sums its terms in the order the
// serial reference uses.

#include "kernels_impl.hpp"

#include <vector>

namespace fstl::kernels::parallel {

namespace {
using Index = std::ptrdiff_t;  // OpenMP loop counters
}

void dense_forward(DenseDims d, const float* x, const float* w, const float* bias, float* y) {
    std::vector<float> wt(d.in * d.out);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(d.in); ++i)
        for (std::size_t o = 0; o < d.out; ++o) wt[i * d.out + o] = w[o * d.in + i];

#pragma omp parallel
    {
        std::vector<double> acc(d.out);
#pragma omp for schedule(static)
        for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
            for (std::size_t o = 0; o < d.out; ++o) acc[o] = bias[o];
            const float* xb = x + b * d.in;
            for (std::size_t i = 0; i < d.in; ++i) {
                const double xi = xb[i];
                const float* wi = wt.data() + i * d.out;
                for (std::size_t o = 0; o < d.out; ++o) acc[o] += static_cast<double>(wi[o]) * xi;
            }
            float* yb = y + b * d.out;
            for (std::size_t o = 0; o < d.out; ++o) yb[o] = static_cast<float>(acc[o]);
        }
    }
}

void dense_backward_params(DenseDims d, const float* g, const float* x, float* dw, float* db) {
#pragma omp parallel
    {
        std::vector<double> acc(d.in);
#pragma omp for schedule(static)
        for (Index o = 0; o < static_cast<Index>(d.out); ++o) {
            std::fill(acc.begin(), acc.end(), 0.0);
            double bias_acc = 0.0;
            for (std::size_t b = 0; b < d.batch; ++b) {
                const double go = g[b * d.out + o];
                const float* xb = x + b * d.in;
                for (std::size_t i = 0; i < d.in; ++i) acc[i] += go * xb[i];
                bias_acc += go;
            }
            float* dwo = dw + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) dwo[i] = static_cast<float>(acc[i]);
            db[o] = static_cast<float>(bias_acc);
        }
    }
}

void dense_backward_input(DenseDims d, const float* g, const float* w, float* dx) {
#pragma omp parallel
    {
        std::vector<double> acc(d.in);
#pragma omp for schedule(static)
        for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t o = 0; o < d.out; ++o) {
                const double go = g[b * d.out + o];
                const float* wo = w + o * d.in;
                for (std::size_t i = 0; i < d.in; ++i) acc[i] += go * wo[i];
            }
            float* dxb = dx + b * d.in;
            for (std::size_t i = 0; i < d.in; ++i) dxb[i] = static_cast<float>(acc[i]);
        }
    }
}

void conv2d_forward(const ConvDims& d, const float* x, const float* w, const float* bias, float* y) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    const auto planes = static_cast<Index>(d.batch * d.out_channels);
#pragma omp parallel
    {
        std::vector<double> acc(oh * ow);
#pragma omp for schedule(static)
        for (Index plane = 0; plane < planes; ++plane) {
            const std::size_t b = static_cast<std::size_t>(plane) / d.out_channels;
            const std::size_t co = static_cast<std::size_t>(plane) % d.out_channels;
            std::fill(acc.begin(), acc.end(), static_cast<double>(bias[co]));
            for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
                const float* xc = x + (b * d.in_channels + ci) * d.height * d.width;
                for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
                    for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                        const double wv = w[((co * d.in_channels + ci) * d.kernel_h + ky) * d.kernel_w + kx];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const float* xr = xc + (oy + ky) * d.width + kx;
                            double* ar = acc.data() + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox) ar[ox] += wv * xr[ox];
                        }
                    }
            }
            float* yp = y + static_cast<std::size_t>(plane) * oh * ow;
            for (std::size_t p = 0; p < oh * ow; ++p) yp[p] = static_cast<float>(acc[p]);
        }
    }
}

void conv2d_backward_params(const ConvDims& d, const float* g, const float* x, float* dw, float* db) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    const std::size_t taps = d.in_channels * d.kernel_h * d.kernel_w;
    const auto total = static_cast<Index>(d.out_channels * taps);
#pragma omp parallel for schedule(static)
    for (Index t = 0; t < total; ++t) {
        const std::size_t co = static_cast<std::size_t>(t) / taps;
        const std::size_t rem = static_cast<std::size_t>(t) % taps;
        const std::size_t ci = rem / (d.kernel_h * d.kernel_w);
        const std::size_t ky = (rem / d.kernel_w) % d.kernel_h;
        const std::size_t kx = rem % d.kernel_w;
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) {
            const float* gp = g + (b * d.out_channels + co) * oh * ow;
            const float* xc = x + (b * d.in_channels + ci) * d.height * d.width;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const float* xr = xc + (oy + ky) * d.width + kx;
                const float* gr = gp + oy * ow;
                for (std::size_t ox = 0; ox < ow; ++ox) acc += static_cast<double>(gr[ox]) * xr[ox];
            }
        }
        dw[t] = static_cast<float>(acc);
    }
#pragma omp parallel for schedule(static)
    for (Index co = 0; co < static_cast<Index>(d.out_channels); ++co) {
        double acc = 0.0;
        for (std::size_t b = 0; b < d.batch; ++b) {
            const float* gp = g + (b * d.out_channels + co) * oh * ow;
            for (std::size_t p = 0; p < oh * ow; ++p) acc += gp[p];
        }
        db[co] = static_cast<float>(acc);
    }
}

void conv2d_backward_input(const ConvDims& d, const float* g, const float* w, float* dx) {
    const std::size_t oh = d.out_height(), ow = d.out_width();
    const auto planes = static_cast<Index>(d.batch * d.in_channels);
#pragma omp parallel
    {
        std::vector<double> acc(d.height * d.width);
#pragma omp for schedule(static)
        for (Index plane = 0; plane < planes; ++plane) {
            const std::size_t b = static_cast<std::size_t>(plane) / d.in_channels;
            const std::size_t ci = static_cast<std::size_t>(plane) % d.in_channels;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t co = 0; co < d.out_channels; ++co) {
                const float* gp = g + (b * d.out_channels + co) * oh * ow;
                for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
                    for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
                        const double wv = w[((co * d.in_channels + ci) * d.kernel_h + ky) * d.kernel_w + kx];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const float* gr = gp + oy * ow;
                            double* ar = acc.data() + (oy + ky) * d.width + kx;
                            for (std::size_t ox = 0; ox < ow; ++ox) ar[ox] += static_cast<double>(gr[ox]) * wv;
                        }
                    }
            }
            float* dp = dx + static_cast<std::size_t>(plane) * d.height * d.width;
            for (std::size_t p = 0; p < d.height * d.width; ++p) dp[p] = static_cast<float>(acc[p]);
        }
    }
}

void relu_forward(std::size_t n, const float* x, float* y) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(n); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::size_t n, const float* x, const float* g, float* dx) {
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(n); ++i) dx[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

}  // namespace fstl::kernels::parallel

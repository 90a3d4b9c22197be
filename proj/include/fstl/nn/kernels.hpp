#pragma once

#include <cstddef>
#include <span>

namespace fstl {

enum class Backend {
    serial,    // straightforward loops, kept as the reference
    parallel,  // OpenMP, cache-friendlier loop order
};

const char* backend_name(Backend b);

namespace kernels {

// Every reduction accumulates float products in double and runs over its
// terms in one fixed order, which both backends share. The parallel variants
// only split work across independent outputs, so their results are
// bit-identical to the serial reference.

struct DenseDims {
    std::size_t batch;
    std::size_t in;
    std::size_t out;
};

/// y[b,o] = bias[o] + sum_i w[o,i] * x[b,i]   (sum over i ascending, seeded with the bias)
void dense_forward(Backend be, DenseDims d, std::span<const float> x, std::span<const float> w,
                   std::span<const float> bias, std::span<float> y);

/// dw[o,i] = sum_b g[b,o] * x[b,i];  db[o] = sum_b g[b,o]   (b ascending)
void dense_backward_params(Backend be, DenseDims d, std::span<const float> g, std::span<const float> x,
                           std::span<float> dw, std::span<float> db);

/// dx[b,i] = sum_o g[b,o] * w[o,i]   (o ascending)
void dense_backward_input(Backend be, DenseDims d, std::span<const float> g, std::span<const float> w,
                          std::span<float> dx);

/// Valid (no padding), stride-1 2-D convolution over NCHW tensors.
struct ConvDims {
    std::size_t batch;
    std::size_t in_channels;
    std::size_t out_channels;
    std::size_t height;  // input
    std::size_t width;   // input
    std::size_t kernel_h;
    std::size_t kernel_w;

    std::size_t out_height() const { return height - kernel_h + 1; }
    std::size_t out_width() const { return width - kernel_w + 1; }
};

/// y[b,co,y,x] = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * x[b,ci,y+ky,x+kx]
void conv2d_forward(Backend be, const ConvDims& d, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y);

/// dw[co,ci,ky,kx] = sum_{b,y,x} g[b,co,y,x] * x[b,ci,y+ky,x+kx];  db[co] = sum_{b,y,x} g[b,co,y,x]
void conv2d_backward_params(Backend be, const ConvDims& d, std::span<const float> g, std::span<const float> x,
                            std::span<float> dw, std::span<float> db);

/// dx[b,ci,iy,ix] = sum_{co,ky,kx} g[b,co,iy-ky,ix-kx] * w[co,ci,ky,kx]   (valid taps only)
void conv2d_backward_input(Backend be, const ConvDims& d, std::span<const float> g, std::span<const float> w,
                           std::span<float> dx);

void relu_forward(Backend be, std::span<const float> x, std::span<float> y);
/// dx = g where x > 0, else 0.
void relu_backward(Backend be, std::span<const float> x, std::span<const float> g, std::span<float> dx);

}  // namespace kernels
}  // namespace fstl

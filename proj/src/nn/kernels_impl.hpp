#pragma once

#include "fstl/nn/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace fstl::kernels {

#define FSTL_KERNEL_DECLS                                                                          \
    void dense_forward(DenseDims d, const float* x, const float* w, const float* bias, float* y); \
    void dense_backward_params(DenseDims d, const float* g, const float* x, float* dw, float* db); \
    void dense_backward_input(DenseDims d, const float* g, const float* w, float* dx);             \
    void conv2d_forward(const ConvDims& d, const float* x, const float* w, const float* bias,      \
                        float* y);                                                                 \
    void conv2d_backward_params(const ConvDims& d, const float* g, const float* x, float* dw,      \
                                float* db);                                                        \
    void conv2d_backward_input(const ConvDims& d, const float* g, const float* w, float* dx);      \
    void relu_forward(std::size_t n, const float* x, float* y);                                    \
    void relu_backward(std::size_t n, const float* x, const float* g, float* dx);

namespace serial {
FSTL_KERNEL_DECLS
}
namespace parallel {
FSTL_KERNEL_DECLS
}

#undef FSTL_KERNEL_DECLS

}  // namespace fstl::kernels

#include "kernels_impl.hpp"

#include <stdexcept>
#include <string>

namespace fstl {

const char* backend_name(Backend b) { return b == Backend::serial ? "serial" : "parallel"; }

namespace kernels {

namespace {

void expect_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw std::invalid_argument(std::string("kernel buffer '") + what + "' has " + std::to_string(got) +
                                    " elements, expected " + std::to_string(want));
}

}  // namespace

#define FSTL_DISPATCH(fn, ...)                  \
    do {                                        \
        if (be == Backend::serial)              \
            serial::fn(__VA_ARGS__);            \
        else                                    \
            parallel::fn(__VA_ARGS__);          \
    } while (0)

void dense_forward(Backend be, DenseDims d, std::span<const float> x, std::span<const float> w,
                   std::span<const float> bias, std::span<float> y) {
    expect_size(x.size(), d.batch * d.in, "x");
    expect_size(w.size(), d.out * d.in, "w");
    expect_size(bias.size(), d.out, "bias");
    expect_size(y.size(), d.batch * d.out, "y");
    FSTL_DISPATCH(dense_forward, d, x.data(), w.data(), bias.data(), y.data());
}

void dense_backward_params(Backend be, DenseDims d, std::span<const float> g, std::span<const float> x,
                           std::span<float> dw, std::span<float> db) {
    expect_size(g.size(), d.batch * d.out, "g");
    expect_size(x.size(), d.batch * d.in, "x");
    expect_size(dw.size(), d.out * d.in, "dw");
    expect_size(db.size(), d.out, "db");
    FSTL_DISPATCH(dense_backward_params, d, g.data(), x.data(), dw.data(), db.data());
}

void dense_backward_input(Backend be, DenseDims d, std::span<const float> g, std::span<const float> w,
                          std::span<float> dx) {
    expect_size(g.size(), d.batch * d.out, "g");
    expect_size(w.size(), d.out * d.in, "w");
    expect_size(dx.size(), d.batch * d.in, "dx");
    FSTL_DISPATCH(dense_backward_input, d, g.data(), w.data(), dx.data());
}

namespace {
void check_conv(const ConvDims& d) {
    if (d.kernel_h == 0 || d.kernel_w == 0 || d.kernel_h > d.height || d.kernel_w > d.width)
        throw std::invalid_argument("conv2d kernel does not fit the input");
}
}  // namespace

void conv2d_forward(Backend be, const ConvDims& d, std::span<const float> x, std::span<const float> w,
                    std::span<const float> bias, std::span<float> y) {
    check_conv(d);
    expect_size(x.size(), d.batch * d.in_channels * d.height * d.width, "x");
    expect_size(w.size(), d.out_channels * d.in_channels * d.kernel_h * d.kernel_w, "w");
    expect_size(bias.size(), d.out_channels, "bias");
    expect_size(y.size(), d.batch * d.out_channels * d.out_height() * d.out_width(), "y");
    FSTL_DISPATCH(conv2d_forward, d, x.data(), w.data(), bias.data(), y.data());
}

void conv2d_backward_params(Backend be, const ConvDims& d, std::span<const float> g, std::span<const float> x,
                            std::span<float> dw, std::span<float> db) {
    check_conv(d);
    expect_size(g.size(), d.batch * d.out_channels * d.out_height() * d.out_width(), "g");
    expect_size(x.size(), d.batch * d.in_channels * d.height * d.width, "x");
    expect_size(dw.size(), d.out_channels * d.in_channels * d.kernel_h * d.kernel_w, "dw");
    expect_size(db.size(), d.out_channels, "db");
    FSTL_DISPATCH(conv2d_backward_params, d, g.data(), x.data(), dw.data(), db.data());
}

void conv2d_backward_input(Backend be, const ConvDims& d, std::span<const float> g, std::span<const float> w,
                           std::span<float> dx) {
    check_conv(d);
    expect_size(g.size(), d.batch * d.out_channels * d.out_height() * d.out_width(), "g");
    expect_size(w.size(), d.out_channels * d.in_channels * d.kernel_h * d.kernel_w, "w");
    expect_size(dx.size(), d.batch * d.in_channels * d.height * d.width, "dx");
    FSTL_DISPATCH(conv2d_backward_input, d, g.data(), w.data(), dx.data());
}

void relu_forward(Backend be, std::span<const float> x, std::span<float> y) {
    expect_size(y.size(), x.size(), "y");
    FSTL_DISPATCH(relu_forward, x.size(), x.data(), y.data());
}

void relu_backward(Backend be, std::span<const float> x, std::span<const float> g, std::span<float> dx) {
    expect_size(g.size(), x.size(), "g");
    expect_size(dx.size(), x.size(), "dx");
    FSTL_DISPATCH(relu_backward, x.size(), x.data(), g.data(), dx.data());
}

#undef FSTL_DISPATCH

}  // namespace kernels
}  // namespace fstl

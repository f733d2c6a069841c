#pragma once

#include <cstdint>
#include <utility>

#include "daq8/tensor.hpp"

namespace daq8 {

struct ConvSpec {
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int kernel_h = 1, kernel_w = 1;

    void validate() const;
    // floor((in + 2*pad - k)/stride) + 1; throws DimensionError when < 1
    std::pair<int64_t, int64_t> output_hw(int64_t in_h, int64_t in_w) const;
};

// Direct-summation convolution primitives. Weights are (C_out, C_in, k1, k2),
// activations and gradients are (N, C, H, W). Each output element accumulates
// in a fixed order, so results are bit-reproducible at any thread count.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const ConvSpec& spec);

// Gradient of conv2d_forward w.r.t. its input (transpose convolution).
// Input spatial extents must be given: they are not recoverable from the
// output extents when the stride does not divide evenly.
Tensor conv2d_backward_input(const Tensor& g, const Tensor& w, const ConvSpec& spec,
                             int64_t in_h, int64_t in_w);

// Gradient of conv2d_forward w.r.t. the weights (dilation convolution).
Tensor conv2d_backward_weight(const Tensor& x, const Tensor& g, const ConvSpec& spec);

// INT8 x INT8 -> INT32 variants. Sums of products are exact as long as the
// per-output-element product count stays within kIntConvMaxProducts
// (2^14 * 127^2 < 2^31); the bound is checked from the extents up front.
inline constexpr int64_t kIntConvMaxProducts = int64_t(1) << 14;

Int32Tensor int_conv_forward(const Int8Tensor& x, const Int8Tensor& w, const ConvSpec& spec);
Int32Tensor int_conv_input_grad(const Int8Tensor& g, const Int8Tensor& w, const ConvSpec& spec,
                                int64_t in_h, int64_t in_w);

// Weight gradient on channel-major operands, matching the backward dataflow:
// x_cm is (C_in, N, H, W), g_cm is (C_out, N, H_out, W_out); result is
// (C_out, C_in, k1, k2).
Int32Tensor int_conv_weight_grad(const Int8Tensor& x_cm, const Int8Tensor& g_cm,
                                 const ConvSpec& spec);

} // namespace daq8

#pragma once

#include <cstdint>
#include <vector>

#include "daq8/clip_state.hpp"
#include "daq8/conv.hpp"
#include "daq8/quantizer.hpp"

namespace daq8 {

// Forward-pass artifacts a conv layer saves for its quantized backward pass.
struct LayerQuantContext {
    int layer_id = 0;
    QuantizedTensor qx; // q(X), sample-major (N,C_in,H,W), scale s_x
    QuantizedTensor qw; // q(W), (C_out,C_in,k1,k2), scale s_w
    ConvSpec spec;
};

enum class ChannelLabel : uint8_t { Gaussian, InvertedT, Degenerate };

struct BackwardOptions {
    uint64_t rounding_seed = 0;
    int64_t iteration = 0;
    // The input-gradient integer conv combines the gradient and weight
    // operands, so its de-quantization pairs |g|_max with s_w. The strict
    // mode reproduces the published scale triple (s_x instead of s_w) for
    // side-by-side comparison.
    bool strict_alg1_gx_scales = false;
};

struct LayerBackwardResult {
    Tensor g_x;
    Tensor g_w;
    // Diagnostics: the per-channel scales the vectorized quantization used
    // (placeholder 1.0 on all-zero slices), per-channel labels (empty in the
    // global-quantization variant), and the layer-wide max |g|.
    std::vector<float> vq_scales;
    std::vector<ChannelLabel> labels;
    float g_max_global = 0.0f;
};

// Distribution-adaptive backward pass for one conv layer: per-channel stats,
// classification and clip-scale update, vectorized stochastic quantization of
// the gradient for the weight path, global stochastic quantization for the
// input path, integer convolutions, and de-quantization back to float. An
// all-zero gradient short-circuits to zero outputs and leaves state untouched.
LayerBackwardResult backward_layer(const LayerQuantContext& ctx, const Tensor& g_y,
                                   ClipState& state, const MCSHyper& hyper,
                                   const BackwardOptions& opts);

// Ablation baseline: identical pipeline, but every channel quantizes with the
// single layer-wide scale max |g|. Touches no clip state.
LayerBackwardResult backward_layer_gq(const LayerQuantContext& ctx, const Tensor& g_y,
                                      const BackwardOptions& opts);

// Stream-key layout shared with diagnostics so logged quantization error can
// replay the exact rounding draws of the backward pass.
uint64_t vq_stream_key(const BackwardOptions& opts, int layer_id);
uint64_t gq_stream_key(const BackwardOptions& opts, int layer_id);

} // namespace daq8

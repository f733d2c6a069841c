#include "daq8/backward_quant.hpp"

#include <cmath>

namespace daq8 {

uint64_t vq_stream_key(const BackwardOptions& opts, int layer_id) {
    return derive_key(opts.rounding_seed, static_cast<uint64_t>(layer_id),
                      static_cast<uint64_t>(opts.iteration), 0);
}

uint64_t gq_stream_key(const BackwardOptions& opts, int layer_id) {
    return derive_key(opts.rounding_seed, static_cast<uint64_t>(layer_id),
                      static_cast<uint64_t>(opts.iteration), 1);
}

namespace {

void check_gradient_shape(const LayerQuantContext& ctx, const Tensor& g_y) {
    const Shape4& xs = ctx.qx.values.shape;
    const Shape4& ws = ctx.qw.values.shape;
    const auto [oh, ow] = ctx.spec.output_hw(xs.h, xs.w);
    const Shape4 expect{xs.n, ws.n, oh, ow};
    if (!(g_y.shape == expect))
        throw DimensionError("layer " + std::to_string(ctx.layer_id) + " gradient " +
                             g_y.shape.str() + " does not match expected " + expect.str());
}

LayerBackwardResult zero_result(const LayerQuantContext& ctx) {
    LayerBackwardResult r;
    r.g_x = Tensor(ctx.qx.values.shape);
    r.g_w = Tensor(ctx.qw.values.shape);
    r.vq_scales.assign(static_cast<size_t>(ctx.qw.values.shape.n), 1.0f);
    r.labels.assign(static_cast<size_t>(ctx.qw.values.shape.n), ChannelLabel::Degenerate);
    return r;
}

// Shared pipeline; `scales` are the per-channel quantization parameters for
// the weight-gradient path (already positive, placeholders on zero slices).
LayerBackwardResult run_pipeline(const LayerQuantContext& ctx, const Tensor& g_y,
                                 const Tensor& g_cm, std::vector<float> scales,
                                 float g_max_global, const BackwardOptions& opts) {
    const Shape4& xs = ctx.qx.values.shape;

    const auto vq =
        quantize_per_channel(g_cm, scales, RoundingMode::stochastic(vq_stream_key(opts, ctx.layer_id)));
    const auto q_gy = quantize(g_y, QuantScale(g_max_global),
                               RoundingMode::stochastic(gq_stream_key(opts, ctx.layer_id)));

    const Int8Tensor x_cm = transpose_to_channel_major(ctx.qx.values);
    const Int32Tensor q_gw = int_conv_weight_grad(x_cm, vq.values, ctx.spec);
    const Int32Tensor q_gx = int_conv_input_grad(q_gy.values, ctx.qw.values, ctx.spec, xs.h, xs.w);

    LayerBackwardResult r;
    r.g_w = dequantize_weight_grad(q_gw, ctx.qx.scale, scales);
    const QuantScale gx_pair = opts.strict_alg1_gx_scales ? ctx.qx.scale : ctx.qw.scale;
    r.g_x = dequantize_global(q_gx, gx_pair, QuantScale(g_max_global));
    r.vq_scales = std::move(scales);
    r.g_max_global = g_max_global;
    return r;
}

} // namespace

LayerBackwardResult backward_layer(const LayerQuantContext& ctx, const Tensor& g_y,
                                   ClipState& state, const MCSHyper& hyper,
                                   const BackwardOptions& opts) {
    check_gradient_shape(ctx, g_y);
    const float g_max_global = max_abs(g_y.span());
    if (g_max_global == 0.0f) return zero_result(ctx);

    const Tensor g_cm = transpose_to_channel_major(g_y);
    const int64_t channels = g_cm.shape.n;

    std::vector<ChannelStats> stats(static_cast<size_t>(channels));
    std::vector<DistributionClass> classes(static_cast<size_t>(channels),
                                           DistributionClass::InvertedT);
    std::vector<ChannelLabel> labels(static_cast<size_t>(channels), ChannelLabel::Degenerate);
    for (int64_t c = 0; c < channels; ++c) {
        stats[c] = compute_channel_stats(g_cm.leading_slice(c));
        if (stats[c].g_max > 0.0f) {
            classes[c] = classify(stats[c], hyper.lambda);
            labels[c] = classes[c] == DistributionClass::Gaussian ? ChannelLabel::Gaussian
                                                                  : ChannelLabel::InvertedT;
        }
    }

    std::vector<float> scales = update_layer(state, ctx.layer_id, stats, classes, hyper);
    for (float& s : scales)
        if (!(s > 0.0f)) s = 1.0f; // never-updated channel, slice is all zeros

    LayerBackwardResult r = run_pipeline(ctx, g_y, g_cm, std::move(scales), g_max_global, opts);
    r.labels = std::move(labels);
    return r;
}

LayerBackwardResult backward_layer_gq(const LayerQuantContext& ctx, const Tensor& g_y,
                                      const BackwardOptions& opts) {
    check_gradient_shape(ctx, g_y);
    const float g_max_global = max_abs(g_y.span());
    if (g_max_global == 0.0f) return zero_result(ctx);

    const Tensor g_cm = transpose_to_channel_major(g_y);
    std::vector<float> scales(static_cast<size_t>(g_cm.shape.n), g_max_global);
    return run_pipeline(ctx, g_y, g_cm, std::move(scales), g_max_global, opts);
}

} // namespace daq8

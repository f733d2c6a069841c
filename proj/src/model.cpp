#include "daq8/model.hpp"

#include <algorithm>
#include <cmath>

#include "daq8/rng.hpp"

namespace daq8 {

std::string precision_name(Precision p) {
    switch (p) {
        case Precision::FP32: return "fp32";
        case Precision::INT8_DA: return "int8-da";
        case Precision::INT8_GQ: return "int8-gq";
    }
    return "?";
}

Precision precision_from_name(const std::string& name) {
    if (name == "fp32") return Precision::FP32;
    if (name == "int8-da") return Precision::INT8_DA;
    if (name == "int8-gq") return Precision::INT8_GQ;
    throw ContractViolation("unknown precision mode '" + name + "'");
}

void ModelSpec::validate() const {
    if (in_channels < 1 || in_h < 1 || in_w < 1)
        throw DimensionError("model input extents must be >= 1");
    int64_t c = in_channels, h = in_h, w = in_w;
    bool seen_linear = false;
    int convs = 0;
    for (const StageSpec& st : stages) {
        if (seen_linear) throw DimensionError("linear stage must be last in the model");
        if (const auto* conv = std::get_if<ConvLayerSpec>(&st)) {
            if (conv->out_channels < 1) throw DimensionError("conv out_channels must be >= 1");
            const auto [oh, ow] = conv->conv.output_hw(h, w);
            c = conv->out_channels;
            h = oh;
            w = ow;
            ++convs;
        } else if (const auto* pool = std::get_if<PoolSpec>(&st)) {
            if (pool->kernel < 1 || pool->stride < 1)
                throw DimensionError("pool kernel/stride must be >= 1");
            h = (h - pool->kernel) / pool->stride + 1;
            w = (w - pool->kernel) / pool->stride + 1;
            if (h < 1 || w < 1) throw DimensionError("pool output extents not >= 1");
        } else if (const auto* lin = std::get_if<LinearSpec>(&st)) {
            if (lin->out_features < 1) throw DimensionError("linear out_features must be >= 1");
            seen_linear = true;
        }
    }
    if (!seen_linear) throw DimensionError("model must end with a linear classifier");
    if (convs == 0) throw DimensionError("model must contain at least one conv layer");
}

int ModelSpec::num_classes() const {
    return static_cast<int>(std::get<LinearSpec>(stages.back()).out_features);
}

int ModelSpec::conv_count() const {
    int n = 0;
    for (const auto& st : stages)
        if (std::holds_alternative<ConvLayerSpec>(st)) ++n;
    return n;
}

ModelSpec default_model_spec(int in_channels, int in_h, int in_w, int num_classes,
                             uint64_t init_seed) {
    ModelSpec spec;
    spec.in_channels = in_channels;
    spec.in_h = in_h;
    spec.in_w = in_w;
    spec.init_seed = init_seed;
    const ConvSpec c3{1, 1, 1, 1, 3, 3};
    spec.stages = {
        ConvLayerSpec{8, c3, true},  ReluSpec{},
        ConvLayerSpec{16, c3, true}, ReluSpec{}, PoolSpec{2, 2},
        ConvLayerSpec{32, c3, true}, ReluSpec{},
        ConvLayerSpec{32, c3, true}, ReluSpec{}, PoolSpec{2, 2},
        LinearSpec{num_classes, true},
    };
    spec.validate();
    return spec;
}

Model init_model(const ModelSpec& spec) {
    spec.validate();
    Model m;
    m.spec = spec;

    ShapeCursor cur{spec.in_channels, spec.in_h, spec.in_w};
    int conv_idx = 0;
    for (const auto& st : spec.stages) {
        if (const auto* conv = std::get_if<ConvLayerSpec>(&st)) {
            ConvParams p;
            p.w = Tensor(Shape4{conv->out_channels, cur.c, conv->conv.kernel_h, conv->conv.kernel_w});
            const double fan_in = static_cast<double>(cur.c) * conv->conv.kernel_h * conv->conv.kernel_w;
            const float std_dev = static_cast<float>(std::sqrt(2.0 / fan_in));
            const CounterRng rng{derive_key(spec.init_seed, 100, static_cast<uint64_t>(conv_idx))};
            for (size_t i = 0; i < p.w.data.size(); ++i)
                p.w.data[i] = std_dev * rng.normal(i);
            p.b.assign(conv->bias ? static_cast<size_t>(conv->out_channels) : 0, 0.0f);
            m.convs.push_back(std::move(p));
            const auto [oh, ow] = conv->conv.output_hw(cur.h, cur.w);
            cur = {conv->out_channels, oh, ow};
            ++conv_idx;
        } else if (const auto* pool = std::get_if<PoolSpec>(&st)) {
            cur.h = (cur.h - pool->kernel) / pool->stride + 1;
            cur.w = (cur.w - pool->kernel) / pool->stride + 1;
        } else if (const auto* lin = std::get_if<LinearSpec>(&st)) {
            const int64_t fan_in = cur.c * cur.h * cur.w;
            m.head.in_features = static_cast<int>(fan_in);
            m.head.out_features = lin->out_features;
            m.head.w.assign(static_cast<size_t>(fan_in) * lin->out_features, 0.0f);
            const float std_dev = static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in)));
            const CounterRng rng{derive_key(spec.init_seed, 200)};
            for (size_t i = 0; i < m.head.w.size(); ++i) m.head.w[i] = std_dev * rng.normal(i);
            m.head.b.assign(lin->bias ? static_cast<size_t>(lin->out_features) : 0, 0.0f);
        }
    }
    return m;
}

namespace {

void add_channel_bias(Tensor& y, std::span<const float> bias) {
    if (bias.empty()) return;
    const int64_t plane = y.shape.h * y.shape.w;
    for (int64_t n = 0; n < y.shape.n; ++n)
        for (int64_t c = 0; c < y.shape.c; ++c) {
            float* row = y.data.data() + (n * y.shape.c + c) * plane;
            const float b = bias[static_cast<size_t>(c)];
            for (int64_t i = 0; i < plane; ++i) row[i] += b;
        }
}

Tensor relu_forward(const Tensor& x, ReluTrace& trace) {
    Tensor y(x.shape);
    trace.mask.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        const bool pos = x.data[i] > 0.0f;
        trace.mask[i] = pos ? 1 : 0;
        y.data[i] = pos ? x.data[i] : 0.0f;
    }
    return y;
}

Tensor pool_forward(const Tensor& x, const PoolSpec& p, PoolTrace& trace) {
    const int64_t oh = (x.shape.h - p.kernel) / p.stride + 1;
    const int64_t ow = (x.shape.w - p.kernel) / p.stride + 1;
    Tensor y(Shape4{x.shape.n, x.shape.c, oh, ow});
    trace.in_shape = x.shape;
    trace.argmax.resize(y.data.size());
    for (int64_t n = 0; n < x.shape.n; ++n)
        for (int64_t c = 0; c < x.shape.c; ++c)
            for (int64_t yh = 0; yh < oh; ++yh)
                for (int64_t yw = 0; yw < ow; ++yw) {
                    int64_t best = x.shape.index(n, c, yh * p.stride, yw * p.stride);
                    float best_v = x.data[static_cast<size_t>(best)];
                    for (int64_t kh = 0; kh < p.kernel; ++kh)
                        for (int64_t kw = 0; kw < p.kernel; ++kw) {
                            const int64_t idx =
                                x.shape.index(n, c, yh * p.stride + kh, yw * p.stride + kw);
                            const float v = x.data[static_cast<size_t>(idx)];
                            if (v > best_v) { // first max wins on ties
                                best_v = v;
                                best = idx;
                            }
                        }
                    const int64_t out_idx = y.shape.index(n, c, yh, yw);
                    y.data[static_cast<size_t>(out_idx)] = best_v;
                    trace.argmax[static_cast<size_t>(out_idx)] = static_cast<int32_t>(best);
                }
    return y;
}

Tensor linear_forward(const Tensor& x_flat, const LinearParams& p) {
    const int64_t n = x_flat.shape.n;
    Tensor y(Shape4{n, p.out_features, 1, 1});
    for (int64_t i = 0; i < n; ++i) {
        const float* xi = x_flat.data.data() + i * p.in_features;
        for (int64_t k = 0; k < p.out_features; ++k) {
            const float* wk = p.w.data() + k * p.in_features;
            float acc = p.b.empty() ? 0.0f : p.b[static_cast<size_t>(k)];
            for (int64_t f = 0; f < p.in_features; ++f) acc += xi[f] * wk[f];
            y.data[static_cast<size_t>(i * p.out_features + k)] = acc;
        }
    }
    return y;
}

} // namespace

ForwardResult forward_model(const Model& model, const Tensor& batch, const ForwardOptions& opts) {
    if (batch.shape.c != model.spec.in_channels || batch.shape.h != model.spec.in_h ||
        batch.shape.w != model.spec.in_w)
        throw DimensionError("batch " + batch.shape.str() + " does not match model input (" +
                             std::to_string(model.spec.in_channels) + "," +
                             std::to_string(model.spec.in_h) + "," +
                             std::to_string(model.spec.in_w) + ")");
    ForwardResult out;
    out.trace.reserve(model.spec.stages.size());
    Tensor x = batch;
    const int n_convs = model.spec.conv_count();
    int conv_idx = 0;
    for (const auto& st : model.spec.stages) {
        if (const auto* conv = std::get_if<ConvLayerSpec>(&st)) {
            const ConvParams& p = model.convs[static_cast<size_t>(conv_idx)];
            const bool exempt =
                opts.exempt_first_last && (conv_idx == 0 || conv_idx == n_convs - 1);
            const bool quantized = opts.precision != Precision::FP32 && !exempt;
            ConvTrace trace;
            trace.quantized = quantized;
            trace.in_shape = x.shape;
            Tensor y;
            if (quantized) {
                const auto mode = RoundingMode::nearest();
                LayerQuantContext ctx;
                ctx.layer_id = conv_idx;
                ctx.qx = quantize_global_maxabs(x, mode);
                ctx.qw = quantize_global_maxabs(p.w, mode);
                ctx.spec = conv->conv;
                y = dequantize_global(int_conv_forward(ctx.qx.values, ctx.qw.values, conv->conv),
                                      ctx.qx.scale, ctx.qw.scale);
                trace.qctx = std::move(ctx);
            } else {
                y = conv2d_forward(x, p.w, conv->conv);
                trace.x = x;
            }
            add_channel_bias(y, p.b);
            out.trace.emplace_back(std::move(trace));
            x = std::move(y);
            ++conv_idx;
        } else if (std::get_if<ReluSpec>(&st)) {
            ReluTrace trace;
            x = relu_forward(x, trace);
            out.trace.emplace_back(std::move(trace));
        } else if (const auto* pool = std::get_if<PoolSpec>(&st)) {
            PoolTrace trace;
            x = pool_forward(x, *pool, trace);
            out.trace.emplace_back(std::move(trace));
        } else {
            const Tensor x_flat(Shape4{x.shape.n, x.shape.c * x.shape.h * x.shape.w, 1, 1},
                                std::vector<float>(x.data));
            LinearTrace trace{x_flat};
            x = linear_forward(x_flat, model.head);
            out.trace.emplace_back(std::move(trace));
        }
    }
    out.logits = std::move(x);
    return out;
}

Gradients backward_model(const Model& model, const ForwardResult& fwd, const Tensor& g_logits,
                         ClipState& state, const BackwardModelOptions& opts) {
    const int n_convs = model.spec.conv_count();
    Gradients grads;
    grads.conv_w.resize(static_cast<size_t>(n_convs));
    grads.conv_b.resize(static_cast<size_t>(n_convs));
    grads.layer_gy.resize(static_cast<size_t>(n_convs));
    grads.layer_diag.resize(static_cast<size_t>(n_convs));

    Tensor g = g_logits;
    int conv_idx = n_convs;
    for (size_t si = model.spec.stages.size(); si-- > 0;) {
        const StageSpec& st = model.spec.stages[si];
        const StageTrace& trace = fwd.trace[si];
        if (const auto* conv = std::get_if<ConvLayerSpec>(&st)) {
            --conv_idx;
            const ConvTrace& tr = std::get<ConvTrace>(trace);
            const ConvParams& p = model.convs[static_cast<size_t>(conv_idx)];

            // bias gradient: sum over (N,H,W) per channel, always in float
            if (!p.b.empty()) {
                std::vector<float>& gb = grads.conv_b[static_cast<size_t>(conv_idx)];
                gb.assign(p.b.size(), 0.0f);
                const int64_t plane = g.shape.h * g.shape.w;
                for (int64_t n = 0; n < g.shape.n; ++n)
                    for (int64_t c = 0; c < g.shape.c; ++c) {
                        const float* row = g.data.data() + (n * g.shape.c + c) * plane;
                        float acc = gb[static_cast<size_t>(c)];
                        for (int64_t i = 0; i < plane; ++i) acc += row[i];
                        gb[static_cast<size_t>(c)] = acc;
                    }
            }

            grads.layer_gy[static_cast<size_t>(conv_idx)] = g;
            if (tr.quantized) {
                BackwardOptions qopts = opts.quant;
                LayerBackwardResult res;
                if (opts.precision == Precision::INT8_GQ)
                    res = backward_layer_gq(*tr.qctx, g, qopts);
                else
                    res = backward_layer(*tr.qctx, g, state, opts.hyper, qopts);
                grads.conv_w[static_cast<size_t>(conv_idx)] = std::move(res.g_w);
                g = std::move(res.g_x);
                res.g_x = Tensor();
                res.g_w = Tensor();
                grads.layer_diag[static_cast<size_t>(conv_idx)] = std::move(res);
            } else {
                grads.conv_w[static_cast<size_t>(conv_idx)] =
                    conv2d_backward_weight(tr.x, g, conv->conv);
                g = conv2d_backward_input(g, p.w, conv->conv, tr.in_shape.h, tr.in_shape.w);
            }
        } else if (std::get_if<ReluSpec>(&st)) {
            const ReluTrace& tr = std::get<ReluTrace>(trace);
            for (size_t i = 0; i < g.data.size(); ++i)
                if (!tr.mask[i]) g.data[i] = 0.0f;
        } else if (std::get_if<PoolSpec>(&st)) {
            const PoolTrace& tr = std::get<PoolTrace>(trace);
            Tensor gx(tr.in_shape);
            for (size_t i = 0; i < g.data.size(); ++i)
                gx.data[static_cast<size_t>(tr.argmax[i])] += g.data[i];
            g = std::move(gx);
        } else {
            const LinearTrace& tr = std::get<LinearTrace>(trace);
            const LinearParams& p = model.head;
            const int64_t n = g.shape.n;
            grads.lin_w.assign(p.w.size(), 0.0f);
            grads.lin_b.assign(p.b.size(), 0.0f);
            Tensor gx(tr.x.shape);
            for (int64_t i = 0; i < n; ++i) {
                const float* gi = g.data.data() + i * p.out_features;
                const float* xi = tr.x.data.data() + i * p.in_features;
                float* gxi = gx.data.data() + i * p.in_features;
                for (int64_t k = 0; k < p.out_features; ++k) {
                    const float gk = gi[k];
                    const float* wk = p.w.data() + k * p.in_features;
                    float* gwk = grads.lin_w.data() + k * p.in_features;
                    for (int64_t f = 0; f < p.in_features; ++f) {
                        gwk[f] += gk * xi[f];
                        gxi[f] += gk * wk[f];
                    }
                    if (!grads.lin_b.empty()) grads.lin_b[static_cast<size_t>(k)] += gk;
                }
            }
            g = std::move(gx);
        }
    }
    // g now holds the input-image gradient; the shape of the next stage down
    // (the data) never consumes it.
    return grads;
}

Momentum zero_momentum(const Model& model) {
    Momentum m;
    for (const auto& c : model.convs) {
        m.conv_w.emplace_back(c.w.shape);
        m.conv_b.emplace_back(c.b.size(), 0.0f);
    }
    m.lin_w.assign(model.head.w.size(), 0.0f);
    m.lin_b.assign(model.head.b.size(), 0.0f);
    return m;
}

namespace {

void momentum_update(std::span<float> param, std::span<float> vel, std::span<const float> grad,
                     float lr, float mu) {
    for (size_t i = 0; i < param.size(); ++i) {
        vel[i] = mu * vel[i] + grad[i];
        param[i] -= lr * vel[i];
    }
}

} // namespace

void sgd_step(Model& model, Momentum& mom, const Gradients& grads, float lr, float momentum) {
    for (size_t l = 0; l < model.convs.size(); ++l) {
        momentum_update(model.convs[l].w.span(), mom.conv_w[l].span(), grads.conv_w[l].span(), lr,
                        momentum);
        momentum_update(model.convs[l].b, mom.conv_b[l], grads.conv_b[l], lr, momentum);
    }
    momentum_update(model.head.w, mom.lin_w, grads.lin_w, lr, momentum);
    momentum_update(model.head.b, mom.lin_b, grads.lin_b, lr, momentum);
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    const int64_t n = logits.shape.n;
    const int64_t k = logits.shape.c;
    if (static_cast<int64_t>(labels.size()) != n)
        throw DimensionError("labels size " + std::to_string(labels.size()) +
                             " != batch extent " + std::to_string(n));
    LossResult res;
    res.g_logits = Tensor(logits.shape);
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const float* z = logits.data.data() + i * k;
        float* gz = res.g_logits.data.data() + i * k;
        const float m = *std::max_element(z, z + k);
        double sum = 0.0;
        for (int64_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j]) - m);
        const double lse = m + std::log(sum);
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= k)
            throw ContractViolation("label " + std::to_string(y) + " out of range [0," +
                                    std::to_string(k) + ")");
        total += lse - z[y];
        for (int64_t j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(z[j]) - lse);
            gz[j] = static_cast<float>((p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n));
        }
    }
    res.loss = total / static_cast<double>(n);
    return res;
}

int64_t correct_predictions(const Tensor& logits, std::span<const int> labels) {
    const int64_t n = logits.shape.n;
    const int64_t k = logits.shape.c;
    int64_t correct = 0;
    for (int64_t i = 0; i < n; ++i) {
        const float* z = logits.data.data() + i * k;
        const int64_t pred = std::max_element(z, z + k) - z;
        if (pred == labels[static_cast<size_t>(i)]) ++correct;
    }
    return correct;
}

} // namespace daq8

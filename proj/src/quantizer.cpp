#include "daq8/quantizer.hpp"

#include <cmath>
#include <string>

namespace daq8 {

QuantScale::QuantScale(float value) : s(value) {
    if (!(value > 0.0f) || !std::isfinite(value))
        throw ContractViolation("quantization scale must be positive and finite, got " +
                                std::to_string(value));
}

float clamp_to_scale(float x, QuantScale s) {
    if (std::isnan(x)) throw ContractViolation("clamp received NaN");
    if (x > s.s) return s.s;
    if (x < -s.s) return -s.s;
    return x;
}

int32_t stochastic_round(float v, const CounterRng& rng, uint64_t counter) {
    const float lo = std::floor(v);
    const float frac = v - lo;
    return static_cast<int32_t>(lo) + (rng.uniform(counter) < frac ? 1 : 0);
}

int32_t RoundingMode::round_value(float v, uint64_t counter) const {
    if (stochastic_) return stochastic_round(v, rng_, counter);
    return static_cast<int32_t>(std::round(v)); // ties away from zero
}

namespace {

void quantize_span(std::span<const float> xs, QuantScale s, const RoundingMode& mode,
                   uint64_t counter_base, int8_t* out) {
    for (size_t i = 0; i < xs.size(); ++i) {
        const float x = xs[i];
        if (!std::isfinite(x)) throw ContractViolation("quantize input is not finite");
        const float v = 127.0f * (clamp_to_scale(x, s) / s.s);
        out[i] = static_cast<int8_t>(mode.round_value(v, counter_base + i));
    }
}

} // namespace

QuantizedTensor quantize(const Tensor& x, QuantScale s, const RoundingMode& mode) {
    QuantizedTensor q{Int8Tensor(x.shape), s};
    quantize_span(x.span(), s, mode, 0, q.values.data.data());
    return q;
}

QuantizedTensor quantize_global_maxabs(const Tensor& x, const RoundingMode& mode) {
    float m = 0.0f;
    for (float v : x.data) {
        if (!std::isfinite(v)) throw ContractViolation("quantize input is not finite");
        const float a = std::fabs(v);
        if (a > m) m = a;
    }
    if (m == 0.0f) return QuantizedTensor{Int8Tensor(x.shape), QuantScale(1.0f)};
    return quantize(x, QuantScale(m), mode);
}

Tensor dequantize(const QuantizedTensor& q) {
    Tensor out(q.values.shape);
    const float s = q.scale.s;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(q.values.data[i]) * s / 127.0f;
    return out;
}

ChannelQuantizedTensor quantize_per_channel(const Tensor& channel_major,
                                            std::span<const float> scales,
                                            const RoundingMode& mode) {
    const int64_t channels = channel_major.shape.n;
    if (static_cast<int64_t>(scales.size()) != channels)
        throw DimensionError("scale count " + std::to_string(scales.size()) +
                             " != leading extent " + std::to_string(channels));
    ChannelQuantizedTensor q{Int8Tensor(channel_major.shape), {scales.begin(), scales.end()}};
    const int64_t slice = channel_major.shape.c * channel_major.shape.h * channel_major.shape.w;
    for (int64_t c = 0; c < channels; ++c)
        quantize_span(channel_major.leading_slice(c), QuantScale(scales[c]), mode,
                      static_cast<uint64_t>(c * slice), q.values.data.data() + c * slice);
    return q;
}

Tensor dequantize_per_channel(const ChannelQuantizedTensor& q) {
    Tensor out(q.values.shape);
    const int64_t slice = out.shape.c * out.shape.h * out.shape.w;
    for (int64_t c = 0; c < out.shape.n; ++c) {
        const float s = q.scales[static_cast<size_t>(c)];
        const int8_t* src = q.values.data.data() + c * slice;
        float* dst = out.data.data() + c * slice;
        for (int64_t i = 0; i < slice; ++i) dst[i] = static_cast<float>(src[i]) * s / 127.0f;
    }
    return out;
}

Tensor dequantize_weight_grad(const Int32Tensor& qgw, QuantScale s_x,
                              std::span<const float> scales) {
    if (static_cast<int64_t>(scales.size()) != qgw.shape.n)
        throw DimensionError("scale count " + std::to_string(scales.size()) +
                             " != output channels " + std::to_string(qgw.shape.n));
    Tensor out(qgw.shape);
    const int64_t slice = qgw.shape.c * qgw.shape.h * qgw.shape.w;
    for (int64_t c = 0; c < qgw.shape.n; ++c) {
        const float factor = s_x.s * scales[static_cast<size_t>(c)];
        const int32_t* src = qgw.data.data() + c * slice;
        float* dst = out.data.data() + c * slice;
        for (int64_t i = 0; i < slice; ++i) dst[i] = static_cast<float>(src[i]) * factor / 16129.0f;
    }
    return out;
}

Tensor dequantize_global(const Int32Tensor& q, QuantScale a, QuantScale b) {
    Tensor out(q.shape);
    const float factor = a.s * b.s;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(q.data[i]) * factor / 16129.0f;
    return out;
}

} // namespace daq8

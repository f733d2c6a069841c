#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "daq8/rng.hpp"
#include "daq8/tensor.hpp"

namespace daq8 {

// Clipping bound / scale of the symmetric 8-bit quantizer. Always positive
// and finite; a quantizer with s = 0 is undefined, so degenerate all-zero
// slices are handled by callers before a scale is ever constructed.
struct QuantScale {
    float s;
    explicit QuantScale(float value);
};

// Nearest rounding breaks ties away from zero, which keeps q(-x) == -q(x).
// Stochastic rounding is a pure function of (key, element counter): identical
// keys reproduce identical draws at any thread count.
class RoundingMode {
public:
    static RoundingMode nearest() { return RoundingMode(false, 0); }
    static RoundingMode stochastic(uint64_t key) { return RoundingMode(true, key); }

    bool is_stochastic() const { return stochastic_; }
    int32_t round_value(float v, uint64_t counter) const;

private:
    RoundingMode(bool stochastic, uint64_t key) : stochastic_(stochastic), rng_{key} {}
    bool stochastic_;
    CounterRng rng_;
};

struct QuantizedTensor {
    Int8Tensor values;
    QuantScale scale;
};

// Leading axis is the channel axis; one scale per leading slice.
struct ChannelQuantizedTensor {
    Int8Tensor values;
    std::vector<float> scales;
};

// Saturating clip to [-s, s]; identity inside the range, sign preserved.
float clamp_to_scale(float x, QuantScale s);

// floor(v) with probability ceil(v)-v, else ceil(v); E[result] = v.
int32_t stochastic_round(float v, const CounterRng& rng, uint64_t counter);

// q = round(127 * clamp(x, s) / s); every output lies in [-127, 127].
QuantizedTensor quantize(const Tensor& x, QuantScale s, const RoundingMode& mode);

// Scale = max |x| over the tensor (1.0 when the tensor is all zeros, in which
// case the payload is all zeros anyway). Returns the tensor ready for the
// integer convolution path.
QuantizedTensor quantize_global_maxabs(const Tensor& x, const RoundingMode& mode);

Tensor dequantize(const QuantizedTensor& q);

// Slice i of the leading axis quantized with scales[i]. Element counters are
// flat tensor indices, so equal scales reproduce the global quantizer
// bit-for-bit.
ChannelQuantizedTensor quantize_per_channel(const Tensor& channel_major,
                                            std::span<const float> scales,
                                            const RoundingMode& mode);

Tensor dequantize_per_channel(const ChannelQuantizedTensor& q);

// De-quantization of an integer weight-gradient: slice i of the leading
// (output-channel) axis is scaled by s_x * scales[i] / 127^2.
Tensor dequantize_weight_grad(const Int32Tensor& qgw, QuantScale s_x,
                              std::span<const float> scales);

// De-quantization of an integer tensor produced from two globally quantized
// operands: every element is scaled by a.s * b.s / 127^2.
Tensor dequantize_global(const Int32Tensor& q, QuantScale a, QuantScale b);

} // namespace daq8

#include "daq8/tensor.hpp"

#include <cmath>

namespace daq8 {

std::string Shape4::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
}

void Shape4::validate() const {
    if (n < 1 || c < 1 || h < 1 || w < 1)
        throw DimensionError("all extents must be >= 1, got " + str());
}

void validate_finite(const Tensor& t, const char* what) {
    for (float v : t.data)
        if (!std::isfinite(v))
            throw ContractViolation(std::string(what) + " contains a non-finite value");
}

namespace {

template <typename T>
BasicTensor<T> swap_leading_axes(const BasicTensor<T>& t) {
    BasicTensor<T> out(Shape4{t.shape.c, t.shape.n, t.shape.h, t.shape.w});
    const int64_t plane = t.shape.h * t.shape.w;
    for (int64_t n = 0; n < t.shape.n; ++n)
        for (int64_t c = 0; c < t.shape.c; ++c) {
            const T* src = t.data.data() + (n * t.shape.c + c) * plane;
            T* dst = out.data.data() + (c * t.shape.n + n) * plane;
            std::copy(src, src + plane, dst);
        }
    return out;
}

} // namespace

Tensor transpose_to_channel_major(const Tensor& t) { return swap_leading_axes(t); }
Int8Tensor transpose_to_channel_major(const Int8Tensor& t) { return swap_leading_axes(t); }

float max_abs(std::span<const float> xs) {
    float m = 0.0f;
    for (float v : xs) {
        const float a = std::fabs(v);
        if (a > m) m = a;
    }
    return m;
}

} // namespace daq8

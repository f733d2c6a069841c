#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "daq8/errors.hpp"

namespace daq8 {

// Extents of a rank-4 array in NCHW order. Per-channel operations always
// index the second extent unless a tensor has been transposed to
// channel-major layout, in which case the channel extent leads.
struct Shape4 {
    int64_t n = 1, c = 1, h = 1, w = 1;

    int64_t numel() const { return n * c * h * w; }
    int64_t index(int64_t in, int64_t ic, int64_t ih, int64_t iw) const {
        return ((in * c + ic) * h + ih) * w + iw;
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
    void validate() const; // all extents >= 1
};

template <typename T>
struct BasicTensor {
    Shape4 shape;
    std::vector<T> data;

    BasicTensor() : data(1, T{}) {}
    explicit BasicTensor(Shape4 s) : shape(s) {
        shape.validate();
        data.assign(static_cast<size_t>(shape.numel()), T{});
    }
    BasicTensor(Shape4 s, std::vector<T> values) : shape(s), data(std::move(values)) {
        shape.validate();
        if (static_cast<int64_t>(data.size()) != shape.numel())
            throw DimensionError("data length " + std::to_string(data.size()) +
                                 " does not match extents " + shape.str());
    }

    T& at(int64_t in, int64_t ic, int64_t ih, int64_t iw) {
        return data[static_cast<size_t>(shape.index(in, ic, ih, iw))];
    }
    T at(int64_t in, int64_t ic, int64_t ih, int64_t iw) const {
        return data[static_cast<size_t>(shape.index(in, ic, ih, iw))];
    }
    int64_t numel() const { return shape.numel(); }

    std::span<T> span() { return {data.data(), data.size()}; }
    std::span<const T> span() const { return {data.data(), data.size()}; }

    // Contiguous slice along the leading axis (length c*h*w).
    std::span<const T> leading_slice(int64_t i) const {
        const int64_t sz = shape.c * shape.h * shape.w;
        return {data.data() + i * sz, static_cast<size_t>(sz)};
    }
    std::span<T> leading_slice(int64_t i) {
        const int64_t sz = shape.c * shape.h * shape.w;
        return {data.data() + i * sz, static_cast<size_t>(sz)};
    }

    bool operator==(const BasicTensor&) const = default;
};

using Tensor = BasicTensor<float>;
using Int8Tensor = BasicTensor<int8_t>;
using Int32Tensor = BasicTensor<int32_t>;

// Throws ContractViolation if any element is NaN/Inf. Used at data
// boundaries (deserialization, dataset load), not inside hot loops.
void validate_finite(const Tensor& t, const char* what);

// (N,C,H,W) -> (C,N,H,W). Self-inverse: applying it twice restores the input.
Tensor transpose_to_channel_major(const Tensor& t);
Int8Tensor transpose_to_channel_major(const Int8Tensor& t);

float max_abs(std::span<const float> xs);

} // namespace daq8
